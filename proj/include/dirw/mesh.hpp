#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "dirw/delaunay.hpp"
#include "dirw/image.hpp"

namespace dirw {

// Paired source/target simplex meshes with shared connectivity. Both point
// sets move during optimization; the leading n_variable points are the
// optimization variables, the trailing frame points are fixed scaffolding
// placed outside the image so the target hull always covers the sample
// domain.
struct DualMesh {
  int ndims{2};
  std::vector<WorldPoint> target_points;
  std::vector<WorldPoint> source_points;
  std::vector<std::array<int, 4>> simplices;  // d+1 used entries
  std::vector<double> reference_volumes;      // signed, initial target mesh
  int n_variable{0};

  // derived connectivity, filled by finalize()
  std::vector<std::vector<int>> incident;       // point -> simplex ids, sorted
  std::vector<std::pair<int, int>> edges;       // unique simplex edges, i < j
  std::vector<int> hull_simplices;              // simplices with a hull face

  int verts_per_simplex() const { return ndims + 1; }
  std::size_t point_count() const { return target_points.size(); }
  std::size_t variable_point_count() const { return n_variable; }
  // all coordinates of variable points, in both meshes
  std::size_t variable_count() const {
    return static_cast<std::size_t>(n_variable) * ndims * 2;
  }

  // computes reference volumes (when empty), incidence, edges, hull list;
  // validates basic structure
  void finalize();

  double target_volume(int simplex) const;
  double source_volume(int simplex) const;

  // genotype packing: variable target coordinates then variable source
  // coordinates
  std::vector<double> pack() const;
  void unpack(const std::vector<double>& genotype);
};

// volume floor under which a simplex counts as degenerate
inline constexpr double kVolumeFloorFraction = 1e-4;

// Builds the dual mesh for an image: contour points along the thresholded
// structure boundary, corner/border/interior filler points, Delaunay
// connectivity, source mesh initialized as a copy.
DualMesh build_mesh(const ScalarImage& image, int n_points);

struct BarycentricLocation {
  int simplex{-1};
  std::array<double, 4> coords{0.0, 0.0, 0.0, 0.0};
};

// barycentric coordinates of p with respect to one simplex of the target mesh
BarycentricLocation barycentric_in(const DualMesh& mesh, int simplex,
                                   const WorldPoint& p);

// Lowest-index simplex containing p (exhaustive scan). Throws LocationError
// outside the hull.
BarycentricLocation locate_brute(const DualMesh& mesh, const WorldPoint& p);

// Bucket-accelerated point location over a mesh snapshot; same result as
// locate_brute for points inside the hull, nearest hull simplex affine
// extension for points outside.
class MeshLocator {
public:
  explicit MeshLocator(const DualMesh& mesh);

  BarycentricLocation locate(const WorldPoint& p) const;        // throws outside
  BarycentricLocation locate_or_nearest(const WorldPoint& p) const;  // total

private:
  const DualMesh& mesh_;
  Vec3 lo_, inv_cell_;
  std::array<int, 3> res_{1, 1, 1};
  std::vector<std::vector<int>> cells_;

  std::size_t cell_of(const WorldPoint& p) const;
};

BarycentricLocation locate(const DualMesh& mesh, const WorldPoint& p);

// T'(p): barycentric coordinates in the target simplex applied to the
// corresponding source simplex vertices.
WorldPoint apply_location(const DualMesh& mesh, const BarycentricLocation& loc);
WorldPoint transform_point(const DualMesh& mesh, const WorldPoint& p);

// True iff every simplex in BOTH meshes keeps its reference orientation and
// stays above the volume floor.
bool is_fold_free(const DualMesh& mesh);
int fold_violation_count(const DualMesh& mesh);
bool simplex_fold_free(const DualMesh& mesh, int simplex);

// Hooke edge energy: mean squared edge-length difference between source and
// target over all simplex edges plus spokes (10 pairs per tetrahedron,
// 6 per triangle).
double simplex_edge_term(const DualMesh& mesh, int simplex);
int edge_pairs_per_simplex(int ndims);
double edge_energy(const DualMesh& mesh);

// All simplices incident to a point (partial evaluation support).
const std::vector<int>& affected_simplices(const DualMesh& mesh, int point_index);

// Mesh serialization: structured text.
void write_mesh(const DualMesh& mesh, const std::string& path);
DualMesh read_mesh(const std::string& path);

}  // namespace dirw
