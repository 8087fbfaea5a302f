#include <doctest.h>

#include <cstdio>

#include "dirw/bspline.hpp"

using namespace dirw;

namespace {

GridGeometry image_geom_2d(int nx = 32, int ny = 32, double spacing = 2.0) {
  GridGeometry g;
  g.ndims = 2;
  g.dims = {nx, ny, 1};
  g.spacing = {spacing, spacing, 1.0};
  return g;
}

BSplineGrid random_grid_2d(Rng& rng, double amplitude,
                           std::array<int, 3> points = {6, 6, 1},
                           const GridGeometry& geom = image_geom_2d()) {
  BSplineGrid grid = BSplineGrid::for_image(geom, points);
  for (Vec3& c : grid.coefficients)
    for (int a = 0; a < grid.ndims; ++a) c[a] = rng.uniform(-amplitude, amplitude);
  return grid;
}

// cardinal cubic B-spline, the textbook closed form; independent of the
// stencil-based evaluation path under test
double cardinal_cubic(double t) {
  const double a = std::abs(t);
  if (a < 1.0) return 2.0 / 3.0 - a * a + a * a * a / 2.0;
  if (a < 2.0) {
    const double m = 2.0 - a;
    return m * m * m / 6.0;
  }
  return 0.0;
}

// brute-force tensor-product sum over the entire lattice
Vec3 full_lattice_displacement(const BSplineGrid& grid, const WorldPoint& p) {
  Vec3 acc;
  for (int j = 0; j < grid.control_dims[1]; ++j)
    for (int i = 0; i < grid.control_dims[0]; ++i) {
      const double ux = (p.x - grid.grid_origin.x) / grid.grid_spacing.x;
      const double uy = (p.y - grid.grid_origin.y) / grid.grid_spacing.y;
      const double w = cardinal_cubic(ux - i) * cardinal_cubic(uy - j);
      acc += w * grid.coefficients[grid.point_index(i, j)];
    }
  return acc;
}

}  // namespace

TEST_CASE("basis weights at u=0") {
  const auto w = bspline_basis(0.0);
  CHECK(w[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK(w[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(w[2] == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK(w[3] == doctest::Approx(0.0));
}

TEST_CASE("basis weights at u=0.5") {
  const auto w = bspline_basis(0.5);
  CHECK(w[0] == doctest::Approx(1.0 / 48.0).epsilon(1e-14));
  CHECK(w[1] == doctest::Approx(23.0 / 48.0).epsilon(1e-14));
  CHECK(w[2] == doctest::Approx(23.0 / 48.0).epsilon(1e-14));
  CHECK(w[3] == doctest::Approx(1.0 / 48.0).epsilon(1e-14));
}

TEST_CASE("partition of unity for random u") {
  Rng rng(17);
  for (int n = 0; n < 200; ++n) {
    const double u = rng.uniform();
    const auto w = bspline_basis(u);
    CHECK(w[0] + w[1] + w[2] + w[3] == doctest::Approx(1.0).epsilon(1e-13));
    const auto d1 = bspline_basis_d1(u);
    CHECK(d1[0] + d1[1] + d1[2] + d1[3] == doctest::Approx(0.0));
    const auto d2 = bspline_basis_d2(u);
    CHECK(d2[0] + d2[1] + d2[2] + d2[3] == doctest::Approx(0.0));
  }
}

TEST_CASE("zero coefficients give the identity transform") {
  const BSplineGrid grid = BSplineGrid::for_image(image_geom_2d(), {7, 7, 1});
  Rng rng(23);
  for (int n = 0; n < 50; ++n) {
    const WorldPoint p{rng.uniform(0.0, 62.0), rng.uniform(0.0, 62.0)};
    const WorldPoint q = transform_point(grid, p);
    CHECK(q.x == doctest::Approx(p.x));
    CHECK(q.y == doctest::Approx(p.y));
  }
}

TEST_CASE("constant coefficients translate every point") {
  BSplineGrid grid = BSplineGrid::for_image(image_geom_2d(), {5, 6, 1});
  for (Vec3& c : grid.coefficients) c = {2.5, -1.0, 0.0};
  Rng rng(29);
  for (int n = 0; n < 50; ++n) {
    const WorldPoint p{rng.uniform(0.0, 62.0), rng.uniform(0.0, 62.0)};
    const WorldPoint q = transform_point(grid, p);
    CHECK(q.x - p.x == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(q.y - p.y == doctest::Approx(-1.0).epsilon(1e-12));
  }
}

TEST_CASE("transform matches the full-lattice tensor-product oracle") {
  Rng rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    const BSplineGrid grid = random_grid_2d(rng, 5.0);
    for (int n = 0; n < 20; ++n) {
      const WorldPoint p{rng.uniform(0.0, 62.0), rng.uniform(0.0, 62.0)};
      const Vec3 fast = displacement(grid, p);
      const Vec3 oracle = full_lattice_displacement(grid, p);
      CHECK(fast.x == doctest::Approx(oracle.x).epsilon(1e-10));
      CHECK(fast.y == doctest::Approx(oracle.y).epsilon(1e-10));
    }
  }
}

TEST_CASE("queries outside the image domain are a domain error") {
  const BSplineGrid grid = BSplineGrid::for_image(image_geom_2d(), {7, 7, 1});
  CHECK_THROWS_AS(transform_point(grid, {-5.0, 10.0}), DomainError);
}

TEST_CASE("affected region of an interior point: 16 cells, 25-point closure") {
  const BSplineGrid grid = BSplineGrid::for_image(image_geom_2d(), {9, 9, 1});
  const PatchRegion region = affected_region(grid, grid.point_index(4, 4));
  CHECK(region.cell_count() == 16);
  CHECK(region.point_closure_count() == 25);
}

TEST_CASE("affected region in 3D: 64 cells, 125-point closure") {
  GridGeometry g;
  g.ndims = 3;
  g.dims = {16, 16, 16};
  g.spacing = {3.0, 3.0, 3.0};
  const BSplineGrid grid = BSplineGrid::for_image(g, {9, 9, 9});
  const PatchRegion region = affected_region(grid, grid.point_index(4, 4, 4));
  CHECK(region.cell_count() == 64);
  CHECK(region.point_closure_count() == 125);
}

TEST_CASE("affected region clips at the lattice corner") {
  const BSplineGrid grid = BSplineGrid::for_image(image_geom_2d(), {7, 7, 1});
  const PatchRegion region = affected_region(grid, grid.point_index(0, 0));
  CHECK(region.cell_count() <= 4);
}

TEST_CASE("bending energy of the identity is zero") {
  const BSplineGrid grid = BSplineGrid::for_image(image_geom_2d(), {6, 6, 1});
  Rng rng(37);
  std::vector<WorldPoint> samples;
  for (int n = 0; n < 100; ++n)
    samples.push_back({rng.uniform(0.0, 62.0), rng.uniform(0.0, 62.0)});
  CHECK(bending_energy(grid, samples) == 0.0);
}

TEST_CASE("affine coefficient fields have zero bending energy") {
  Rng rng(41);
  for (int rep = 0; rep < 20; ++rep) {
    BSplineGrid grid = BSplineGrid::for_image(image_geom_2d(), {6, 7, 1});
    const double A[2][2] = {{rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)},
                            {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)}};
    const Vec3 b{rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)};
    for (int j = 0; j < grid.control_dims[1]; ++j)
      for (int i = 0; i < grid.control_dims[0]; ++i) {
        const WorldPoint x = grid.point_position(i, j);
        grid.coefficients[grid.point_index(i, j)] = {
            A[0][0] * x.x + A[0][1] * x.y + b.x,
            A[1][0] * x.x + A[1][1] * x.y + b.y, 0.0};
      }
    // spline reproduces the affine map exactly
    for (int n = 0; n < 10; ++n) {
      const WorldPoint p{rng.uniform(0.0, 62.0), rng.uniform(0.0, 62.0)};
      const Vec3 u = displacement(grid, p);
      CHECK(std::abs(u.x - (A[0][0] * p.x + A[0][1] * p.y + b.x)) < 1e-9);
      CHECK(std::abs(u.y - (A[1][0] * p.x + A[1][1] * p.y + b.y)) < 1e-9);
    }
    std::vector<WorldPoint> samples;
    for (int n = 0; n < 30; ++n)
      samples.push_back({rng.uniform(0.0, 62.0), rng.uniform(0.0, 62.0)});
    CHECK(std::abs(bending_energy(grid, samples)) < 1e-9);
  }
}

TEST_CASE("bending energy matches a finite-difference oracle") {
  Rng rng(43);
  for (int rep = 0; rep < 5; ++rep) {
    const BSplineGrid grid = random_grid_2d(rng, 4.0);
    std::vector<WorldPoint> samples;
    for (int n = 0; n < 25; ++n)
      samples.push_back({rng.uniform(2.0, 60.0), rng.uniform(2.0, 60.0)});
    const double analytic = bending_energy(grid, samples);

    const double h = 1e-3 * grid.grid_spacing.x;
    double fd_sum = 0.0;
    for (const WorldPoint& p : samples) {
      double frob2 = 0.0;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          Vec3 second;
          if (a == b) {
            WorldPoint pp = p, pm = p;
            pp[a] += h;
            pm[a] -= h;
            second = (displacement(grid, pp) - 2.0 * displacement(grid, p) +
                      displacement(grid, pm)) *
                     (1.0 / (h * h));
          } else {
            WorldPoint pa = p, pb = p, pc = p, pd = p;
            pa[a] += h; pa[b] += h;
            pb[a] += h; pb[b] -= h;
            pc[a] -= h; pc[b] += h;
            pd[a] -= h; pd[b] -= h;
            second = (displacement(grid, pa) - displacement(grid, pb) -
                      displacement(grid, pc) + displacement(grid, pd)) *
                     (1.0 / (4.0 * h * h));
          }
          frob2 += second.x * second.x + second.y * second.y;
        }
      fd_sum += frob2;
    }
    const double fd = fd_sum / samples.size();
    CHECK(analytic == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("partial contribution over the whole lattice equals full evaluation") {
  Rng rng(47);
  ScalarImage source, target;
  source.geom = target.geom = image_geom_2d();
  source.voxels.resize(source.geom.voxel_count());
  target.voxels.resize(target.geom.voxel_count());
  for (auto& v : source.voxels) v = static_cast<float>(rng.uniform(0.0, 1.0));
  for (auto& v : target.voxels) v = static_cast<float>(rng.uniform(0.0, 1.0));

  const BSplineGrid grid = random_grid_2d(rng, 3.0);
  std::vector<WorldPoint> samples;
  for (int n = 0; n < 200; ++n)
    samples.push_back({rng.uniform(0.0, 62.0), rng.uniform(0.0, 62.0)});
  CellBuckets buckets;
  buckets.build(grid, samples);

  const ObjectiveParts whole = partial_contribution(
      grid, whole_lattice_region(grid), source, target, samples, buckets);

  double ssd_sum = 0.0, bend_sum = 0.0;
  for (const WorldPoint& p : samples) {
    const SplineStencil st = make_stencil(grid, p, true);
    const double diff =
        interpolate(target, p) - interpolate(source, p + displacement(grid, st));
    ssd_sum += diff * diff;
    bend_sum += bending_term(grid, st);
  }
  CHECK(whole.ssd_sum == doctest::Approx(ssd_sum).epsilon(1e-12));
  CHECK(whole.bend_sum == doctest::Approx(bend_sum).epsilon(1e-12));
}

TEST_CASE("transform is C2 across a cell boundary") {
  Rng rng(53);
  const BSplineGrid grid = random_grid_2d(rng, 5.0);
  // a vertical cell face sits at the second interior control point
  const double face_x = grid.grid_origin.x + 2.0 * grid.grid_spacing.x;
  const double eps = 1e-7;
  for (int n = 0; n < 20; ++n) {
    const double y = rng.uniform(5.0, 57.0);
    const WorldPoint left{face_x - eps, y};
    const WorldPoint right{face_x + eps, y};
    const Vec3 ul = displacement(grid, left);
    const Vec3 ur = displacement(grid, right);
    CHECK(std::abs(ul.x - ur.x) < 1e-6);
    const double bl = bending_term(grid, make_stencil(grid, left, true));
    const double br = bending_term(grid, make_stencil(grid, right, true));
    CHECK(bl == doctest::Approx(br).epsilon(1e-4));
  }
}

TEST_CASE("min-Jacobian diagnostic reports folds without enforcing them") {
  const GridGeometry geom = image_geom_2d();
  BSplineGrid grid = BSplineGrid::for_image(geom, {7, 7, 1});
  CHECK(min_jacobian_determinant(grid, geom) == doctest::Approx(1.0));
  // push one point hard against its neighbor to fold the transform
  grid.coefficients[grid.point_index(3, 3)] = {-3.0 * grid.grid_spacing.x, 0.0,
                                               0.0};
  CHECK(min_jacobian_determinant(grid, geom) < 0.0);
}

TEST_CASE("grid serialization round trip") {
  Rng rng(59);
  const BSplineGrid grid = random_grid_2d(rng, 2.0);
  write_grid(grid, "test_grid.bsg");
  const BSplineGrid back = read_grid("test_grid.bsg");
  CHECK(back.control_dims == grid.control_dims);
  REQUIRE(back.coefficients.size() == grid.coefficients.size());
  for (std::size_t p = 0; p < grid.coefficients.size(); ++p) {
    CHECK(back.coefficients[p].x == grid.coefficients[p].x);
    CHECK(back.coefficients[p].y == grid.coefficients[p].y);
  }
  std::remove("test_grid.bsg");
}
