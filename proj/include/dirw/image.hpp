#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dirw/common.hpp"

namespace dirw {

// Regular voxel grid geometry shared by images and deformation fields.
// Axis-aligned, origin at the center of voxel (0,...,0), x varies fastest
// in memory. Supports 2 or 3 axes; unused axes have dim 1 and spacing 1.
struct GridGeometry {
  int ndims{2};
  std::array<int, 3> dims{1, 1, 1};
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{0.0, 0.0, 0.0};

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }

  std::size_t index(int i, int j, int k = 0) const {
    return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
  }

  WorldPoint voxel_center(int i, int j, int k = 0) const {
    return {origin.x + i * spacing.x, origin.y + j * spacing.y,
            origin.z + k * spacing.z};
  }

  // world extent spanned by voxel centers
  Vec3 extent() const {
    Vec3 e;
    for (int a = 0; a < ndims; ++a) e[a] = (dims[a] - 1) * spacing[a];
    return e;
  }

  WorldPoint domain_min() const { return origin; }
  WorldPoint domain_max() const { return origin + extent(); }

  bool contains(const WorldPoint& p, double tol = 1e-9) const {
    for (int a = 0; a < ndims; ++a) {
      if (p[a] < origin[a] - tol || p[a] > origin[a] + (dims[a] - 1) * spacing[a] + tol)
        return false;
    }
    return true;
  }

  bool same_grid(const GridGeometry& o) const {
    return ndims == o.ndims && dims == o.dims;
  }
};

// Scalar intensity image; voxels stored as float32, interpolated in double.
struct ScalarImage {
  GridGeometry geom;
  std::vector<float> voxels;

  float& at(int i, int j, int k = 0) { return voxels[geom.index(i, j, k)]; }
  float at(int i, int j, int k = 0) const { return voxels[geom.index(i, j, k)]; }

  void validate() const;
};

// Per-voxel displacement vectors in target space, inverse-transform
// convention (vector points toward source space).
struct DeformationField {
  GridGeometry geom;
  std::vector<Vec3> vectors;

  Vec3& at(int i, int j, int k = 0) { return vectors[geom.index(i, j, k)]; }
  const Vec3& at(int i, int j, int k = 0) const {
    return vectors[geom.index(i, j, k)];
  }
};

// Multilinear interpolation over the 2^d surrounding voxels. Out-of-bounds
// queries clamp to the nearest boundary voxel center, making this total.
double interpolate(const ScalarImage& image, const WorldPoint& p);

// Gradient of the multilinear interpolant at p, exact within the voxel cell
// containing p (out-of-bounds clamped like interpolate).
Vec3 interpolate_gradient(const ScalarImage& image, const WorldPoint& p);

// Multilinear interpolation of a deformation field, component-wise.
Vec3 interpolate_dvf(const DeformationField& field, const WorldPoint& p);

// Rasterizes any transform into a deformation field over the given geometry:
// stores T'(p_t) - p_t at every voxel center p_t.
DeformationField rasterize_dvf(const std::function<WorldPoint(const WorldPoint&)>& transform,
                               const GridGeometry& geometry);

// File I/O. Text header (key: value lines), a DATA line, then raw
// little-endian float32 payload; deformation fields carry d floats per voxel.
void write_image(const ScalarImage& image, const std::string& path);
ScalarImage read_image(const std::string& path);
void write_dvf(const DeformationField& field, const std::string& path);
DeformationField read_dvf(const std::string& path);

}  // namespace dirw
