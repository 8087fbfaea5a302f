#pragma once

#include <array>
#include <vector>

#include "dirw/common.hpp"

namespace dirw {

// Delaunay triangulation of a point set in 2 or 3 dimensions via incremental
// Bowyer-Watson. Returns simplices as index tuples (d+1 used entries) with
// positive orientation. Throws MeshInitError when the cavity bookkeeping
// breaks down on degenerate input; callers retry with perturbed points.
std::vector<std::array<int, 4>> delaunay_triangulate(
    const std::vector<WorldPoint>& points, int ndims);

// signed area (2D) / signed volume (3D) of a simplex given explicit vertices
double simplex_signed_volume(const WorldPoint* verts, int ndims);

}  // namespace dirw
