#include "dirw/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dirw {

std::array<double, 4> bspline_basis(double u) {
  const double u2 = u * u;
  const double u3 = u2 * u;
  const double m = 1.0 - u;
  return {m * m * m / 6.0, (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0,
          (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0, u3 / 6.0};
}

std::array<double, 4> bspline_basis_d1(double u) {
  const double u2 = u * u;
  const double m = 1.0 - u;
  return {-m * m / 2.0, (3.0 * u2 - 4.0 * u) / 2.0,
          (-3.0 * u2 + 2.0 * u + 1.0) / 2.0, u2 / 2.0};
}

std::array<double, 4> bspline_basis_d2(double u) {
  return {1.0 - u, 3.0 * u - 2.0, 1.0 - 3.0 * u, u};
}

BSplineGrid BSplineGrid::for_image(const GridGeometry& image_geom,
                                   std::array<int, 3> control_points_per_axis) {
  BSplineGrid grid;
  grid.ndims = image_geom.ndims;
  grid.control_dims = {1, 1, 1};
  for (int a = 0; a < grid.ndims; ++a) {
    const int m = control_points_per_axis[a];
    if (m < 4) throw ConfigError("B-spline grid needs >= 4 points per axis");
    grid.control_dims[a] = m;
    const double extent = (image_geom.dims[a] - 1) * image_geom.spacing[a];
    grid.grid_spacing[a] = extent / (m - 3);
    grid.grid_origin[a] = image_geom.origin[a] - grid.grid_spacing[a];
  }
  grid.coefficients.assign(grid.point_count(), Vec3{});
  return grid;
}

std::array<int, 3> BSplineGrid::point_coords(std::size_t index) const {
  const int nx = control_dims[0];
  const int ny = control_dims[1];
  std::array<int, 3> c{};
  c[0] = static_cast<int>(index % nx);
  c[1] = static_cast<int>((index / nx) % ny);
  c[2] = static_cast<int>(index / (static_cast<std::size_t>(nx) * ny));
  return c;
}

std::vector<double> BSplineGrid::pack() const {
  std::vector<double> g;
  g.reserve(variable_count());
  for (const Vec3& c : coefficients)
    for (int a = 0; a < ndims; ++a) g.push_back(c[a]);
  return g;
}

void BSplineGrid::unpack(const std::vector<double>& genotype) {
  if (genotype.size() != variable_count())
    throw EvalError("genotype length does not match B-spline variable count");
  for (std::size_t p = 0; p < coefficients.size(); ++p) {
    Vec3 c;
    for (int a = 0; a < ndims; ++a) c[a] = genotype[p * ndims + a];
    coefficients[p] = c;
  }
}

std::size_t PatchRegion::cell_count() const {
  std::size_t n = 1;
  for (int a = 0; a < ndims; ++a)
    n *= static_cast<std::size_t>(cell_hi[a] - cell_lo[a] + 1);
  return n;
}

std::size_t PatchRegion::point_closure_count() const {
  std::size_t n = 1;
  for (int a = 0; a < ndims; ++a)
    n *= static_cast<std::size_t>(cell_hi[a] - cell_lo[a] + 2);
  return n;
}

bool PatchRegion::contains_cell(const std::array<int, 3>& cell) const {
  for (int a = 0; a < ndims; ++a)
    if (cell[a] < cell_lo[a] || cell[a] > cell_hi[a]) return false;
  return true;
}

PatchRegion affected_region(const BSplineGrid& grid, std::size_t control_index) {
  const std::array<int, 3> pc = grid.point_coords(control_index);
  PatchRegion region;
  region.ndims = grid.ndims;
  for (int a = 0; a < grid.ndims; ++a) {
    // cell c reads control points c-1..c+2, so point j feeds cells j-2..j+1
    region.cell_lo[a] = std::max(grid.first_cell(), pc[a] - 2);
    region.cell_hi[a] = std::min(grid.last_cell(a), pc[a] + 1);
    if (region.cell_hi[a] < region.cell_lo[a])
      throw EvalError("control point affects no cell");
  }
  return region;
}

PatchRegion whole_lattice_region(const BSplineGrid& grid) {
  PatchRegion region;
  region.ndims = grid.ndims;
  for (int a = 0; a < grid.ndims; ++a) {
    region.cell_lo[a] = grid.first_cell();
    region.cell_hi[a] = grid.last_cell(a);
  }
  return region;
}

SplineStencil make_stencil(const BSplineGrid& grid, const WorldPoint& p,
                           bool with_derivatives) {
  SplineStencil s{};
  for (int a = 0; a < 3; ++a) {
    if (a >= grid.ndims) {
      s.base[a] = 0;
      s.cell[a] = 1;  // unused axes sit in the first (only) cell slot
      s.w[a][0] = 1.0;
      continue;
    }
    const double u = (p[a] - grid.grid_origin[a]) / grid.grid_spacing[a];
    int cell = static_cast<int>(std::floor(u));
    // the far image edge evaluates as t=1 of the last interior cell
    cell = std::clamp(cell, grid.first_cell(), grid.last_cell(a));
    const double t = u - cell;
    s.cell[a] = cell;
    s.base[a] = cell - 1;
    const auto w = bspline_basis(t);
    std::copy(w.begin(), w.end(), s.w[a]);
    if (with_derivatives) {
      const auto d1 = bspline_basis_d1(t);
      const auto d2 = bspline_basis_d2(t);
      const double inv = 1.0 / grid.grid_spacing[a];
      for (int q = 0; q < 4; ++q) {
        s.dw[a][q] = d1[q] * inv;
        s.ddw[a][q] = d2[q] * inv * inv;
      }
    }
  }
  return s;
}

namespace {

bool in_domain(const BSplineGrid& grid, const WorldPoint& p, double tol = 1e-9) {
  for (int a = 0; a < grid.ndims; ++a) {
    const double lo = grid.grid_origin[a] + grid.grid_spacing[a];
    const double hi =
        grid.grid_origin[a] + (grid.control_dims[a] - 2) * grid.grid_spacing[a];
    if (p[a] < lo - tol || p[a] > hi + tol) return false;
  }
  return true;
}

}  // namespace

Vec3 displacement(const BSplineGrid& grid, const SplineStencil& s) {
  Vec3 acc;
  const int kmax = grid.ndims == 3 ? 3 : 0;
  for (int k = 0; k <= kmax; ++k) {
    const double wk = grid.ndims == 3 ? s.w[2][k] : 1.0;
    const int gk = grid.ndims == 3 ? s.base[2] + k : 0;
    for (int j = 0; j < 4; ++j) {
      const double wkj = wk * s.w[1][j];
      const int gj = s.base[1] + j;
      const std::size_t row = grid.point_index(s.base[0], gj, gk);
      for (int i = 0; i < 4; ++i)
        acc += (wkj * s.w[0][i]) * grid.coefficients[row + i];
    }
  }
  return acc;
}

Vec3 displacement(const BSplineGrid& grid, const WorldPoint& p) {
  return displacement(grid, make_stencil(grid, p, false));
}

WorldPoint transform_point(const BSplineGrid& grid, const WorldPoint& p) {
  if (!in_domain(grid, p))
    throw DomainError("B-spline transform queried outside the image domain");
  return p + displacement(grid, p);
}

double bending_term(const BSplineGrid& grid, const SplineStencil& s) {
  const int d = grid.ndims;
  // accumulate the d x d Hessian of each displacement component
  double hess[3][3][3] = {};  // [component][a][b]
  const int kmax = d == 3 ? 3 : 0;
  for (int k = 0; k <= kmax; ++k) {
    const int gk = d == 3 ? s.base[2] + k : 0;
    for (int j = 0; j < 4; ++j) {
      const int gj = s.base[1] + j;
      const std::size_t row = grid.point_index(s.base[0], gj, gk);
      for (int i = 0; i < 4; ++i) {
        const Vec3& c = grid.coefficients[row + i];
        const double wq[3] = {s.w[0][i], s.w[1][j], d == 3 ? s.w[2][k] : 1.0};
        const double dq[3] = {s.dw[0][i], s.dw[1][j], d == 3 ? s.dw[2][k] : 0.0};
        const double ddq[3] = {s.ddw[0][i], s.ddw[1][j],
                               d == 3 ? s.ddw[2][k] : 0.0};
        for (int a = 0; a < d; ++a)
          for (int b = a; b < d; ++b) {
            double w = 1.0;
            for (int axis = 0; axis < d; ++axis) {
              if (axis == a && axis == b)
                w *= ddq[axis];
              else if (axis == a || axis == b)
                w *= dq[axis];
              else
                w *= wq[axis];
            }
            for (int comp = 0; comp < d; ++comp) hess[comp][a][b] += w * c[comp];
          }
      }
    }
  }
  double frob2 = 0.0;
  for (int comp = 0; comp < d; ++comp)
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) {
        const double h = hess[comp][a][b];
        frob2 += (a == b) ? h * h : 2.0 * h * h;
      }
  return frob2;
}

double bending_energy(const BSplineGrid& grid,
                      const std::vector<WorldPoint>& samples) {
  if (samples.empty()) return 0.0;
  double sum = 0.0;
  for (const WorldPoint& p : samples)
    sum += bending_term(grid, make_stencil(grid, p, true));
  return sum / static_cast<double>(samples.size());
}

double jacobian_determinant(const BSplineGrid& grid, const WorldPoint& p) {
  const int d = grid.ndims;
  const SplineStencil s = make_stencil(grid, p, true);
  double jac[3][3] = {};  // [component][axis]
  const int kmax = d == 3 ? 3 : 0;
  for (int k = 0; k <= kmax; ++k) {
    const int gk = d == 3 ? s.base[2] + k : 0;
    for (int j = 0; j < 4; ++j) {
      const std::size_t row = grid.point_index(s.base[0], s.base[1] + j, gk);
      for (int i = 0; i < 4; ++i) {
        const Vec3& c = grid.coefficients[row + i];
        const double wq[3] = {s.w[0][i], s.w[1][j], d == 3 ? s.w[2][k] : 1.0};
        const double dq[3] = {s.dw[0][i], s.dw[1][j], d == 3 ? s.dw[2][k] : 0.0};
        for (int a = 0; a < d; ++a) {
          double w = 1.0;
          for (int axis = 0; axis < d; ++axis) w *= (axis == a) ? dq[axis] : wq[axis];
          for (int comp = 0; comp < d; ++comp) jac[comp][a] += w * c[comp];
        }
      }
    }
  }
  for (int a = 0; a < d; ++a) jac[a][a] += 1.0;
  if (d == 2) return jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
  return jac[0][0] * (jac[1][1] * jac[2][2] - jac[1][2] * jac[2][1]) -
         jac[0][1] * (jac[1][0] * jac[2][2] - jac[1][2] * jac[2][0]) +
         jac[0][2] * (jac[1][0] * jac[2][1] - jac[1][1] * jac[2][0]);
}

double min_jacobian_determinant(const BSplineGrid& grid,
                                const GridGeometry& geometry) {
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < geometry.dims[2]; ++k)
    for (int j = 0; j < geometry.dims[1]; ++j)
      for (int i = 0; i < geometry.dims[0]; ++i)
        best = std::min(best,
                        jacobian_determinant(grid, geometry.voxel_center(i, j, k)));
  return best;
}

void CellBuckets::build(const BSplineGrid& grid,
                        const std::vector<WorldPoint>& points) {
  n_cells = {1, 1, 1};
  std::size_t total = 1;
  for (int a = 0; a < grid.ndims; ++a) {
    n_cells[a] = grid.last_cell(a) - grid.first_cell() + 1;
    total *= n_cells[a];
  }
  sample_ids.assign(total, {});
  for (std::size_t s = 0; s < points.size(); ++s) {
    const SplineStencil st = make_stencil(grid, points[s], false);
    sample_ids[cell_linear({st.cell[0], st.cell[1], st.cell[2]})].push_back(
        static_cast<int>(s));
  }
}

ObjectiveParts partial_contribution(const BSplineGrid& grid,
                                    const PatchRegion& region,
                                    const ScalarImage& source,
                                    const ScalarImage& target,
                                    const std::vector<WorldPoint>& samples,
                                    const CellBuckets& buckets) {
  ObjectiveParts parts;
  const int klo = grid.ndims == 3 ? region.cell_lo[2] : 1;
  const int khi = grid.ndims == 3 ? region.cell_hi[2] : 1;
  for (int ck = klo; ck <= khi; ++ck)
    for (int cj = region.cell_lo[1]; cj <= region.cell_hi[1]; ++cj)
      for (int ci = region.cell_lo[0]; ci <= region.cell_hi[0]; ++ci) {
        const std::size_t lin = buckets.cell_linear({ci, cj, ck});
        for (int sid : buckets.sample_ids[lin]) {
          const WorldPoint& p = samples[sid];
          const SplineStencil st = make_stencil(grid, p, true);
          const WorldPoint moved = p + displacement(grid, st);
          const double diff = interpolate(target, p) - interpolate(source, moved);
          parts.ssd_sum += diff * diff;
          parts.bend_sum += bending_term(grid, st);
        }
      }
  return parts;
}

void write_grid(const BSplineGrid& grid, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os.precision(17);
  os << "NDims: " << grid.ndims << "\n";
  os << "ControlDims:";
  for (int a = 0; a < grid.ndims; ++a) os << " " << grid.control_dims[a];
  os << "\nGridSpacing:";
  for (int a = 0; a < grid.ndims; ++a) os << " " << grid.grid_spacing[a];
  os << "\nGridOrigin:";
  for (int a = 0; a < grid.ndims; ++a) os << " " << grid.grid_origin[a];
  os << "\nCOEFFICIENTS\n";
  for (const Vec3& c : grid.coefficients) {
    for (int a = 0; a < grid.ndims; ++a) os << (a ? " " : "") << c[a];
    os << "\n";
  }
  if (!os) throw IoError("failed writing " + path);
}

BSplineGrid read_grid(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  BSplineGrid grid;
  std::string line;
  bool in_header = true;
  while (in_header && std::getline(is, line)) {
    if (line == "COEFFICIENTS") {
      in_header = false;
      break;
    }
    const auto colon = line.find(':');
    if (colon == std::string::npos)
      throw MalformedHeaderError(path + ": bad grid header line '" + line + "'");
    const std::string key = line.substr(0, colon);
    std::istringstream vals(line.substr(colon + 1));
    if (key == "NDims") {
      if (!(vals >> grid.ndims) || (grid.ndims != 2 && grid.ndims != 3))
        throw MalformedHeaderError(path + ": NDims must be 2 or 3");
    } else if (key == "ControlDims") {
      for (int a = 0; a < grid.ndims; ++a)
        if (!(vals >> grid.control_dims[a]) || grid.control_dims[a] < 4)
          throw MalformedHeaderError(path + ": bad ControlDims");
    } else if (key == "GridSpacing") {
      for (int a = 0; a < grid.ndims; ++a)
        if (!(vals >> grid.grid_spacing[a]))
          throw MalformedHeaderError(path + ": bad GridSpacing");
    } else if (key == "GridOrigin") {
      for (int a = 0; a < grid.ndims; ++a)
        if (!(vals >> grid.grid_origin[a]))
          throw MalformedHeaderError(path + ": bad GridOrigin");
    } else {
      throw MalformedHeaderError(path + ": unknown grid header key '" + key + "'");
    }
  }
  if (in_header) throw MalformedHeaderError(path + ": missing COEFFICIENTS line");
  grid.coefficients.reserve(grid.point_count());
  for (std::size_t n = 0; n < grid.point_count(); ++n) {
    Vec3 c;
    for (int a = 0; a < grid.ndims; ++a)
      if (!(is >> c[a]))
        throw TruncatedPayloadError(path + ": fewer coefficients than declared");
    grid.coefficients.push_back(c);
  }
  return grid;
}

}  // namespace dirw
