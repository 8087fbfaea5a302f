#include <doctest.h>

#include <cstdio>

#include "dirw/mesh.hpp"
#include "dirw/phantom.hpp"

using namespace dirw;

namespace {

ScalarImage blob_image_2d() {
  PhantomSpec spec = desk_phantom_spec(PhantomKind::IsolatedBlob);
  return generate_phantom(spec, PhantomState::Target, 7);
}

// single positively oriented unit simplex, shared by both meshes
DualMesh unit_simplex_mesh(int ndims) {
  DualMesh mesh;
  mesh.ndims = ndims;
  if (ndims == 2) {
    mesh.target_points = {{0, 0}, {1, 0}, {0, 1}};
    mesh.simplices = {{0, 1, 2, -1}};
  } else {
    mesh.target_points = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    mesh.simplices = {{0, 1, 2, 3}};
  }
  mesh.source_points = mesh.target_points;
  mesh.n_variable = static_cast<int>(mesh.target_points.size());
  mesh.finalize();
  return mesh;
}

// regular lattice triangulation: each cell split into two triangles
DualMesh lattice_mesh_2d(int n) {
  DualMesh mesh;
  mesh.ndims = 2;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      mesh.target_points.push_back({static_cast<double>(i), static_cast<double>(j)});
  for (int j = 0; j + 1 < n; ++j)
    for (int i = 0; i + 1 < n; ++i) {
      const int v00 = j * n + i, v10 = j * n + i + 1;
      const int v01 = (j + 1) * n + i, v11 = (j + 1) * n + i + 1;
      mesh.simplices.push_back({v00, v10, v11, -1});
      mesh.simplices.push_back({v00, v11, v01, -1});
    }
  mesh.source_points = mesh.target_points;
  mesh.n_variable = static_cast<int>(mesh.target_points.size());
  mesh.finalize();
  return mesh;
}

}  // namespace

TEST_CASE("a 170-point 3D dual mesh has 1020 optimization variables") {
  PhantomSpec spec = desk_phantom_spec(PhantomKind::IsolatedBlob);
  spec.geom.ndims = 3;
  spec.geom.dims = {24, 24, 24};
  spec.geom.spacing = {3, 3, 3};
  spec.blob_center = {34.5, 34.5, 34.5};
  spec.source_radii = {20, 22, 19};
  spec.target_radii = {12, 13, 11};
  const ScalarImage img = generate_phantom(spec, PhantomState::Target, 7);
  const DualMesh mesh = build_mesh(img, 170);
  CHECK(mesh.variable_point_count() == 170);
  CHECK(mesh.variable_count() == 1020);
  CHECK(is_fold_free(mesh));
  CHECK(edge_energy(mesh) == 0.0);
}

TEST_CASE("initial 2D mesh is fold-free with zero edge energy") {
  const DualMesh mesh = build_mesh(blob_image_2d(), 40);
  CHECK(mesh.variable_point_count() == 40);
  CHECK(mesh.variable_count() == 160);
  CHECK(is_fold_free(mesh));
  CHECK(edge_energy(mesh) == 0.0);
}

TEST_CASE("too few points is a mesh-init error") {
  CHECK_THROWS_AS(build_mesh(blob_image_2d(), 2), MeshInitError);
}

TEST_CASE("an image without a boundary is a mesh-init error") {
  ScalarImage flat;
  flat.geom.ndims = 2;
  flat.geom.dims = {16, 16, 1};
  flat.voxels.assign(256, 1.0f);
  CHECK_THROWS_AS(build_mesh(flat, 20), MeshInitError);
}

TEST_CASE("locating a simplex centroid returns that simplex") {
  const DualMesh mesh = build_mesh(blob_image_2d(), 30);
  for (int s : {0, 3, 7}) {
    Vec3 centroid;
    for (int q = 0; q <= 2; ++q)
      centroid += mesh.target_points[mesh.simplices[s][q]];
    centroid = centroid * (1.0 / 3.0);
    const BarycentricLocation loc = locate_brute(mesh, centroid);
    CHECK(loc.simplex == s);
    for (int q = 0; q <= 2; ++q)
      CHECK(loc.coords[q] == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  }
}

TEST_CASE("a shared vertex locates in its lowest-index incident simplex") {
  const DualMesh mesh = lattice_mesh_2d(4);
  const int vertex = 1 * 4 + 1;  // interior point
  const BarycentricLocation loc = locate_brute(mesh, mesh.target_points[vertex]);
  CHECK(loc.simplex == mesh.incident[vertex].front());
  double max_coord = 0.0;
  for (int q = 0; q <= 2; ++q) max_coord = std::max(max_coord, loc.coords[q]);
  CHECK(max_coord == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("accelerated locate matches the brute-force oracle") {
  const DualMesh mesh = build_mesh(blob_image_2d(), 40);
  const MeshLocator locator(mesh);
  Rng rng(61);
  for (int n = 0; n < 300; ++n) {
    const WorldPoint p{rng.uniform(0.0, 189.0), rng.uniform(0.0, 189.0)};
    const BarycentricLocation fast = locator.locate(p);
    const BarycentricLocation brute = locate_brute(mesh, p);
    CHECK(fast.simplex == brute.simplex);
  }
}

TEST_CASE("locate outside the hull is a location error") {
  const DualMesh mesh = unit_simplex_mesh(2);
  CHECK_THROWS_AS(locate_brute(mesh, {5.0, 5.0}), LocationError);
}

TEST_CASE("identical meshes give the identity transform") {
  const DualMesh mesh = build_mesh(blob_image_2d(), 30);
  Rng rng(67);
  for (int n = 0; n < 50; ++n) {
    const WorldPoint p{rng.uniform(10.0, 180.0), rng.uniform(10.0, 180.0)};
    const WorldPoint q = transform_point(mesh, p);
    CHECK(q.x == doctest::Approx(p.x).epsilon(1e-10));
    CHECK(q.y == doctest::Approx(p.y).epsilon(1e-10));
  }
}

TEST_CASE("an affine source mesh reproduces the affine map") {
  DualMesh mesh = build_mesh(blob_image_2d(), 30);
  const double A[2][2] = {{1.1, 0.2}, {-0.1, 0.9}};
  const Vec3 b{4.0, -2.0, 0.0};
  for (std::size_t p = 0; p < mesh.source_points.size(); ++p) {
    const WorldPoint& t = mesh.target_points[p];
    mesh.source_points[p] = {A[0][0] * t.x + A[0][1] * t.y + b.x,
                             A[1][0] * t.x + A[1][1] * t.y + b.y, 0.0};
  }
  Rng rng(71);
  for (int n = 0; n < 50; ++n) {
    const WorldPoint p{rng.uniform(10.0, 180.0), rng.uniform(10.0, 180.0)};
    const WorldPoint q = transform_point(mesh, p);
    CHECK(q.x == doctest::Approx(A[0][0] * p.x + A[0][1] * p.y + b.x).epsilon(1e-9));
    CHECK(q.y == doctest::Approx(A[1][0] * p.x + A[1][1] * p.y + b.y).epsilon(1e-9));
  }
}

TEST_CASE("transform matches an explicit per-simplex affine oracle") {
  DualMesh mesh = build_mesh(blob_image_2d(), 30);
  Rng rng(73);
  for (std::size_t p = 0; p < mesh.source_points.size(); ++p)
    for (int a = 0; a < 2; ++a) mesh.source_points[p][a] += rng.uniform(-2.0, 2.0);

  for (int n = 0; n < 100; ++n) {
    const WorldPoint p{rng.uniform(5.0, 185.0), rng.uniform(5.0, 185.0)};
    const BarycentricLocation loc = locate_brute(mesh, p);
    // explicit affine map of the containing simplex: T(x) = S M^-1 (x - t0) + s0
    const auto& s = mesh.simplices[loc.simplex];
    const Vec3 t0 = mesh.target_points[s[0]];
    const Vec3 e1 = mesh.target_points[s[1]] - t0;
    const Vec3 e2 = mesh.target_points[s[2]] - t0;
    const double det = e1.x * e2.y - e1.y * e2.x;
    const Vec3 r = p - t0;
    const double l1 = (r.x * e2.y - r.y * e2.x) / det;
    const double l2 = (e1.x * r.y - e1.y * r.x) / det;
    const Vec3 s0 = mesh.source_points[s[0]];
    const Vec3 f1 = mesh.source_points[s[1]] - s0;
    const Vec3 f2 = mesh.source_points[s[2]] - s0;
    const Vec3 oracle = s0 + l1 * f1 + l2 * f2;
    const WorldPoint q = transform_point(mesh, p);
    CHECK(q.x == doctest::Approx(oracle.x).epsilon(1e-10));
    CHECK(q.y == doctest::Approx(oracle.y).epsilon(1e-10));
  }
}

TEST_CASE("piecewise affine: convex combinations commute with the transform") {
  DualMesh mesh = build_mesh(blob_image_2d(), 25);
  Rng rng(79);
  for (std::size_t p = 0; p < mesh.source_points.size(); ++p)
    for (int a = 0; a < 2; ++a) mesh.source_points[p][a] += rng.uniform(-2.0, 2.0);
  for (int n = 0; n < 50; ++n) {
    const int s = static_cast<int>(rng.uniform_index(mesh.simplices.size()));
    double l0 = rng.uniform(), l1 = rng.uniform(0.0, 1.0 - l0);
    const double l2 = 1.0 - l0 - l1;
    Vec3 p;
    Vec3 expected;
    for (int q = 0; q <= 2; ++q) {
      const double l = q == 0 ? l0 : (q == 1 ? l1 : l2);
      p += l * mesh.target_points[mesh.simplices[s][q]];
      expected += l * mesh.source_points[mesh.simplices[s][q]];
    }
    const WorldPoint mapped = transform_point(mesh, p);
    CHECK(mapped.x == doctest::Approx(expected.x).epsilon(1e-9));
    CHECK(mapped.y == doctest::Approx(expected.y).epsilon(1e-9));
  }
}

TEST_CASE("reflecting a source vertex through the opposite face is a fold") {
  DualMesh mesh = unit_simplex_mesh(3);
  CHECK(is_fold_free(mesh));
  // reflect vertex 3 through the plane of vertices 0,1,2 (z=0)
  mesh.source_points[3].z = -1.0;
  CHECK_FALSE(is_fold_free(mesh));
  CHECK(fold_violation_count(mesh) == 1);
}

TEST_CASE("a simplex shrunk below the volume floor is degenerate") {
  DualMesh mesh = unit_simplex_mesh(2);
  const double ref_area = mesh.reference_volumes[0];
  // scale the source simplex so its area falls to half the floor
  const double target_area = 0.5 * kVolumeFloorFraction * ref_area;
  const double scale = std::sqrt(target_area / ref_area);
  for (WorldPoint& p : mesh.source_points) p = p * scale;
  CHECK_FALSE(is_fold_free(mesh));
}

TEST_CASE("edge energy is zero under rigid translation of either mesh") {
  DualMesh mesh = build_mesh(blob_image_2d(), 25);
  for (WorldPoint& p : mesh.source_points) p += Vec3{12.0, -7.0, 0.0};
  CHECK(edge_energy(mesh) == doctest::Approx(0.0));
  DualMesh mesh2 = build_mesh(blob_image_2d(), 25);
  for (WorldPoint& p : mesh2.target_points) p += Vec3{-4.0, 9.0, 0.0};
  CHECK(edge_energy(mesh2) == doctest::Approx(0.0));
}

TEST_CASE("edge energy of a doubled unit tetrahedron is 13/10") {
  DualMesh mesh = unit_simplex_mesh(3);
  for (WorldPoint& p : mesh.source_points) p = p * 2.0;
  // 6 edges (3 of length 1, 3 of length sqrt 2) and 4 spokes
  // (one of length sqrt(1/3), three of length sqrt(11/9)); doubling the
  // source multiplies each length by 2, so the energy is
  // (1/10) * sum L^2 = (1/10) * (3 + 6 + 1/3 + 11/3) = 13/10
  CHECK(edge_pairs_per_simplex(3) == 10);
  CHECK(edge_energy(mesh) == doctest::Approx(1.3).epsilon(1e-12));
}

TEST_CASE("2D simplices carry 6 edge pairs") {
  CHECK(edge_pairs_per_simplex(2) == 6);
}

TEST_CASE("an interior lattice vertex touches 6 triangles") {
  const DualMesh mesh = lattice_mesh_2d(5);
  const int vertex = 2 * 5 + 2;
  CHECK(affected_simplices(mesh, vertex).size() == 6);
}

TEST_CASE("a vertex used by one simplex has a singleton star") {
  const DualMesh mesh = unit_simplex_mesh(2);
  CHECK(affected_simplices(mesh, 0).size() == 1);
}

TEST_CASE("fold-free meshes keep distinct points distinct") {
  DualMesh mesh = build_mesh(blob_image_2d(), 30);
  Rng rng(83);
  // jitter both meshes, rejecting folds
  for (int attempt = 0; attempt < 100; ++attempt) {
    DualMesh trial = mesh;
    for (int p = 0; p < trial.n_variable; ++p)
      for (int a = 0; a < 2; ++a) {
        trial.target_points[p][a] += rng.uniform(-4.0, 4.0);
        trial.source_points[p][a] += rng.uniform(-4.0, 4.0);
      }
    if (is_fold_free(trial)) {
      mesh = trial;
      break;
    }
  }
  REQUIRE(is_fold_free(mesh));
  std::vector<WorldPoint> mapped;
  std::vector<WorldPoint> originals;
  for (int n = 0; n < 200; ++n) {
    const WorldPoint p{rng.uniform(5.0, 185.0), rng.uniform(5.0, 185.0)};
    originals.push_back(p);
    mapped.push_back(transform_point(mesh, p));
  }
  for (std::size_t a = 0; a < mapped.size(); ++a)
    for (std::size_t b = a + 1; b < mapped.size(); ++b) {
      if ((originals[a] - originals[b]).norm() < 0.5) continue;
      CHECK((mapped[a] - mapped[b]).norm() > 1e-7);
    }
}

TEST_CASE("mesh serialization round trip") {
  const DualMesh mesh = build_mesh(blob_image_2d(), 25);
  write_mesh(mesh, "test_mesh.dmsh");
  const DualMesh back = read_mesh("test_mesh.dmsh");
  CHECK(back.ndims == mesh.ndims);
  CHECK(back.n_variable == mesh.n_variable);
  CHECK(back.point_count() == mesh.point_count());
  CHECK(back.simplices == mesh.simplices);
  for (std::size_t p = 0; p < mesh.point_count(); ++p) {
    CHECK(back.target_points[p].x == mesh.target_points[p].x);
    CHECK(back.source_points[p].y == mesh.source_points[p].y);
  }
  std::remove("test_mesh.dmsh");
}
