#pragma once

#include <array>
#include <string>
#include <vector>

#include "dirw/image.hpp"

namespace dirw {

// Uniform cubic B-spline basis on the unit cell.
std::array<double, 4> bspline_basis(double u);
std::array<double, 4> bspline_basis_d1(double u);
std::array<double, 4> bspline_basis_d2(double u);

// Free-form deformation on a regular control-point lattice. The lattice
// covers the image voxel-center hull plus one extra point layer on each
// side, so every point of the domain has a full 4^d stencil.
struct BSplineGrid {
  int ndims{2};
  std::array<int, 3> control_dims{4, 4, 1};  // >= 4 per axis
  Vec3 grid_spacing{1.0, 1.0, 1.0};
  Vec3 grid_origin{0.0, 0.0, 0.0};
  std::vector<Vec3> coefficients;  // displacement per control point, x fastest

  static BSplineGrid for_image(const GridGeometry& image_geom,
                               std::array<int, 3> control_points_per_axis);

  std::size_t point_count() const {
    return static_cast<std::size_t>(control_dims[0]) * control_dims[1] *
           control_dims[2];
  }
  std::size_t variable_count() const { return point_count() * ndims; }

  std::size_t point_index(int i, int j, int k = 0) const {
    return (static_cast<std::size_t>(k) * control_dims[1] + j) * control_dims[0] +
           i;
  }
  std::array<int, 3> point_coords(std::size_t index) const;
  WorldPoint point_position(int i, int j, int k = 0) const {
    return {grid_origin.x + i * grid_spacing.x, grid_origin.y + j * grid_spacing.y,
            grid_origin.z + k * grid_spacing.z};
  }

  // interior cells per axis (cell c spans control points c..c+1, c in
  // [1, control_dims-3]); the image domain is tiled by exactly these cells
  int first_cell() const { return 1; }
  int last_cell(int axis) const { return control_dims[axis] - 3; }

  // genotype packing: one (x,y[,z]) displacement triple per control point
  std::vector<double> pack() const;
  void unpack(const std::vector<double>& genotype);
};

// Axis-aligned block of grid cells whose transform values change when one
// control point moves.
struct PatchRegion {
  int ndims{2};
  std::array<int, 3> cell_lo{0, 0, 0};  // inclusive
  std::array<int, 3> cell_hi{0, 0, 0};  // inclusive

  std::size_t cell_count() const;
  // lattice points on the corners of the block, 25 for an interior 2D
  // point, 125 in 3D
  std::size_t point_closure_count() const;
  bool contains_cell(const std::array<int, 3>& cell) const;
};

PatchRegion affected_region(const BSplineGrid& grid, std::size_t control_index);
PatchRegion whole_lattice_region(const BSplineGrid& grid);

// Per-point evaluation stencil: cell, local weights, derivative weights.
struct SplineStencil {
  int base[3];        // first control-point index per axis
  int cell[3];        // cell index per axis
  double w[3][4];     // basis weights
  double dw[3][4];    // d/dx weights (1/mm)
  double ddw[3][4];   // d2/dx2 weights (1/mm^2)
};

SplineStencil make_stencil(const BSplineGrid& grid, const WorldPoint& p,
                           bool with_derivatives);

Vec3 displacement(const BSplineGrid& grid, const SplineStencil& s);
Vec3 displacement(const BSplineGrid& grid, const WorldPoint& p);

// T'(p) = p + displacement(p); throws DomainError outside the image domain.
WorldPoint transform_point(const BSplineGrid& grid, const WorldPoint& p);

// Squared Frobenius norm of the tensor of second spatial derivatives of T'
// at one point, computed from analytic basis derivatives.
double bending_term(const BSplineGrid& grid, const SplineStencil& s);

// Mean bending term over a sample set.
double bending_energy(const BSplineGrid& grid,
                      const std::vector<WorldPoint>& samples);

// Jacobian determinant of T' at p; negative values indicate folding. The
// model does not enforce fold-freeness, this is a reportable diagnostic.
double jacobian_determinant(const BSplineGrid& grid, const WorldPoint& p);
double min_jacobian_determinant(const BSplineGrid& grid,
                                const GridGeometry& geometry);

// Samples pre-bucketed by grid cell so partial contributions touch only the
// samples inside a region.
struct CellBuckets {
  std::array<int, 3> n_cells{1, 1, 1};
  std::vector<std::vector<int>> sample_ids;  // per linear cell, x fastest

  void build(const BSplineGrid& grid, const std::vector<WorldPoint>& points);
  std::size_t cell_linear(const std::array<int, 3>& cell) const {
    return (static_cast<std::size_t>(cell[2] - 1) * n_cells[1] + (cell[1] - 1)) *
               n_cells[0] +
           (cell[0] - 1);
  }
};

struct ObjectiveParts {
  double ssd_sum{0.0};
  double bend_sum{0.0};
};

// Objective contributions restricted to the samples inside a region. The
// full objective equals cached total - old region part + new region part.
ObjectiveParts partial_contribution(const BSplineGrid& grid,
                                    const PatchRegion& region,
                                    const ScalarImage& source,
                                    const ScalarImage& target,
                                    const std::vector<WorldPoint>& samples,
                                    const CellBuckets& buckets);

// Grid serialization: structured text, one coefficient tuple per line.
void write_grid(const BSplineGrid& grid, const std::string& path);
BSplineGrid read_grid(const std::string& path);

}  // namespace dirw
