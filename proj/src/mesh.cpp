#include "dirw/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace dirw {

namespace {

double signed_volume(const std::vector<WorldPoint>& pts,
                     const std::array<int, 4>& s, int ndims) {
  WorldPoint v[4];
  for (int q = 0; q <= ndims; ++q) v[q] = pts[s[q]];
  return simplex_signed_volume(v, ndims);
}

}  // namespace

double DualMesh::target_volume(int simplex) const {
  return signed_volume(target_points, simplices[simplex], ndims);
}

double DualMesh::source_volume(int simplex) const {
  return signed_volume(source_points, simplices[simplex], ndims);
}

void DualMesh::finalize() {
  if (target_points.size() != source_points.size())
    throw MeshInitError("point lists differ in length");
  if (n_variable <= 0 || n_variable > static_cast<int>(target_points.size()))
    throw MeshInitError("bad variable point count");

  if (reference_volumes.empty()) {
    reference_volumes.reserve(simplices.size());
    for (std::size_t s = 0; s < simplices.size(); ++s) {
      const double vol = target_volume(static_cast<int>(s));
      if (vol == 0.0) throw MeshInitError("degenerate simplex in initial mesh");
      reference_volumes.push_back(vol);
    }
  } else if (reference_volumes.size() != simplices.size()) {
    throw MeshInitError("reference volume count mismatch");
  }

  incident.assign(target_points.size(), {});
  std::map<std::pair<int, int>, bool> edge_set;
  for (std::size_t s = 0; s < simplices.size(); ++s) {
    for (int q = 0; q <= ndims; ++q) {
      const int v = simplices[s][q];
      if (v < 0 || v >= static_cast<int>(target_points.size()))
        throw MeshInitError("simplex index out of range");
      incident[v].push_back(static_cast<int>(s));
      for (int r = q + 1; r <= ndims; ++r) {
        const int w = simplices[s][r];
        edge_set[{std::min(v, w), std::max(v, w)}] = true;
      }
    }
  }
  for (std::size_t p = 0; p < incident.size(); ++p) {
    if (incident[p].empty())
      throw MeshInitError("mesh point belongs to no simplex");
    std::sort(incident[p].begin(), incident[p].end());
  }
  edges.clear();
  edges.reserve(edge_set.size());
  for (const auto& [e, _] : edge_set) edges.push_back(e);

  // hull simplices: those owning a face not shared with another simplex
  std::map<std::array<int, 3>, int> face_count;
  auto face_key = [&](const std::array<int, 4>& s, int skip) {
    std::array<int, 3> f{-1, -1, -1};
    int w = 0;
    for (int q = 0; q <= ndims; ++q)
      if (q != skip) f[w++] = s[q];
    std::sort(f.begin(), f.begin() + ndims);
    return f;
  };
  for (const auto& s : simplices)
    for (int skip = 0; skip <= ndims; ++skip) face_count[face_key(s, skip)]++;
  hull_simplices.clear();
  for (std::size_t s = 0; s < simplices.size(); ++s)
    for (int skip = 0; skip <= ndims; ++skip)
      if (face_count[face_key(simplices[s], skip)] == 1) {
        hull_simplices.push_back(static_cast<int>(s));
        break;
      }
}

std::vector<double> DualMesh::pack() const {
  std::vector<double> g;
  g.reserve(variable_count());
  for (int p = 0; p < n_variable; ++p)
    for (int a = 0; a < ndims; ++a) g.push_back(target_points[p][a]);
  for (int p = 0; p < n_variable; ++p)
    for (int a = 0; a < ndims; ++a) g.push_back(source_points[p][a]);
  return g;
}

void DualMesh::unpack(const std::vector<double>& genotype) {
  if (genotype.size() != variable_count())
    throw EvalError("genotype length does not match mesh variable count");
  const std::size_t half = genotype.size() / 2;
  for (int p = 0; p < n_variable; ++p)
    for (int a = 0; a < ndims; ++a) {
      target_points[p][a] = genotype[p * ndims + a];
      source_points[p][a] = genotype[half + p * ndims + a];
    }
}

// ---------------------------------------------------------------------------
// Mesh construction
// ---------------------------------------------------------------------------

namespace {

// deterministic symmetry-breaking jitter derived from (index, attempt)
Vec3 hash_jitter(int index, int attempt, double magnitude, int ndims) {
  Rng rng(0x5eedULL + static_cast<std::uint64_t>(index) * 7919ULL +
          static_cast<std::uint64_t>(attempt) * 15485863ULL);
  Vec3 j;
  for (int a = 0; a < ndims; ++a) j[a] = rng.uniform(-magnitude, magnitude);
  return j;
}

// greedy farthest-point sampling: repeatedly picks the candidate farthest
// from everything selected so far
std::vector<WorldPoint> farthest_point_sample(
    const std::vector<WorldPoint>& candidates,
    const std::vector<WorldPoint>& seeds, int count) {
  std::vector<WorldPoint> chosen;
  if (count <= 0 || candidates.empty()) return chosen;
  std::vector<double> dist(candidates.size(),
                           std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    for (const WorldPoint& s : seeds)
      dist[i] = std::min(dist[i], (candidates[i] - s).norm2());
  for (int picked = 0; picked < count; ++picked) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i)
      if (dist[i] > dist[best]) best = i;
    if (!std::isfinite(dist[best]) && !seeds.empty() && picked > 0) break;
    chosen.push_back(candidates[best]);
    for (std::size_t i = 0; i < candidates.size(); ++i)
      dist[i] = std::min(dist[i], (candidates[i] - candidates[best]).norm2());
  }
  return chosen;
}

std::vector<WorldPoint> boundary_voxel_centers(const ScalarImage& image,
                                               double threshold) {
  const GridGeometry& g = image.geom;
  std::vector<WorldPoint> out;
  const int nk = g.ndims == 3 ? g.dims[2] : 1;
  for (int k = 0; k < nk; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        if (image.at(i, j, k) < threshold) continue;
        bool boundary = false;
        const int di[6] = {-1, 1, 0, 0, 0, 0};
        const int dj[6] = {0, 0, -1, 1, 0, 0};
        const int dk[6] = {0, 0, 0, 0, -1, 1};
        for (int q = 0; q < 2 * g.ndims; ++q) {
          const int ii = i + di[q], jj = j + dj[q], kk = k + dk[q];
          if (ii < 0 || jj < 0 || kk < 0 || ii >= g.dims[0] ||
              jj >= g.dims[1] || kk >= (g.ndims == 3 ? g.dims[2] : 1))
            continue;
          if (image.at(ii, jj, kk) < threshold) boundary = true;
        }
        if (boundary) out.push_back(g.voxel_center(i, j, k));
      }
  return out;
}

std::vector<WorldPoint> domain_corners(const GridGeometry& g, double offset) {
  const Vec3 lo = g.domain_min() - Vec3{offset, offset, offset};
  const Vec3 hi = g.domain_max() + Vec3{offset, offset, offset};
  std::vector<WorldPoint> corners;
  const int nz = g.ndims == 3 ? 2 : 1;
  for (int ck = 0; ck < nz; ++ck)
    for (int cj = 0; cj < 2; ++cj)
      for (int ci = 0; ci < 2; ++ci)
        corners.push_back({ci ? hi.x : lo.x, cj ? hi.y : lo.y,
                           g.ndims == 3 ? (ck ? hi.z : lo.z) : 0.0});
  return corners;
}

void validate_tiling(const DualMesh& mesh, const GridGeometry& domain,
                     const Vec3& frame_lo, const Vec3& frame_hi) {
  double covered = 0.0;
  for (std::size_t s = 0; s < mesh.simplices.size(); ++s) {
    const double vol = mesh.target_volume(static_cast<int>(s));
    if (vol <= 0.0) throw MeshInitError("non-positive simplex after build");
    covered += vol;
  }
  // the hull must cover at least the image domain and fit the frame box
  double inner = 1.0, outer = 1.0;
  for (int a = 0; a < mesh.ndims; ++a) {
    inner *= (domain.dims[a] - 1) * domain.spacing[a];
    outer *= frame_hi[a] - frame_lo[a];
  }
  if (covered < inner || covered > outer * 1.01)
    throw MeshInitError("triangulation volume out of range (broken cavity)");

  // a probe grid over the image domain must be fully locatable
  const auto axis_probes = [](int n) {
    std::vector<int> v;
    for (int i = 0; i < n; i += 2) v.push_back(i);
    if (v.back() != n - 1) v.push_back(n - 1);
    return v;
  };
  const MeshLocator locator(mesh);
  const auto pi = axis_probes(domain.dims[0]);
  const auto pj = axis_probes(domain.dims[1]);
  const auto pk = domain.ndims == 3 ? axis_probes(domain.dims[2])
                                    : std::vector<int>{0};
  try {
    for (int k : pk)
      for (int j : pj)
        for (int i : pi) locator.locate(domain.voxel_center(i, j, k));
  } catch (const LocationError&) {
    throw MeshInitError("image domain not covered by the mesh hull");
  }
}

}  // namespace

DualMesh build_mesh(const ScalarImage& image, int n_points) {
  const GridGeometry& g = image.geom;
  const int d = g.ndims;
  if (n_points < d + 1)
    throw MeshInitError("mesh needs at least d+1 points to form one simplex");

  float vmin = image.voxels[0], vmax = image.voxels[0];
  for (float v : image.voxels) {
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  if (!(vmax > vmin))
    throw MeshInitError("no structure boundary found (flat image)");
  // midpoint between the background and the faintest structure, so brighter
  // rigid structures do not push the threshold above the deforming one
  float faintest = vmax;
  const float eps = 1e-6f * (vmax - vmin);
  for (float v : image.voxels)
    if (v > vmin + eps) faintest = std::min(faintest, v);
  const double threshold = 0.5 * (static_cast<double>(vmin) + faintest);

  const std::vector<WorldPoint> contour_candidates =
      boundary_voxel_centers(image, threshold);
  if (contour_candidates.empty())
    throw MeshInitError("no structure boundary found at threshold");

  // point budget: half on the contour, a fifth on the border, rest interior
  const int n_corner = std::min(1 << d, n_points);
  int remaining = n_points - n_corner;
  const int n_contour = std::min(remaining, (n_points + 1) / 2);
  remaining -= n_contour;
  const int n_border = std::min(remaining, n_points / 5);
  const int n_interior = remaining - n_border;

  std::vector<WorldPoint> variable = domain_corners(g, 0.0);
  variable.resize(n_corner);

  const auto contour =
      farthest_point_sample(contour_candidates, variable, n_contour);
  variable.insert(variable.end(), contour.begin(), contour.end());

  std::vector<WorldPoint> border_candidates;
  {
    const int nk = d == 3 ? g.dims[2] : 1;
    for (int k = 0; k < nk; ++k)
      for (int j = 0; j < g.dims[1]; ++j)
        for (int i = 0; i < g.dims[0]; ++i) {
          const bool on_border =
              i == 0 || j == 0 || i == g.dims[0] - 1 || j == g.dims[1] - 1 ||
              (d == 3 && (k == 0 || k == g.dims[2] - 1));
          if (on_border) border_candidates.push_back(g.voxel_center(i, j, k));
        }
  }
  const auto border = farthest_point_sample(border_candidates, variable, n_border);
  variable.insert(variable.end(), border.begin(), border.end());

  std::vector<WorldPoint> interior_candidates;
  {
    const int nk = d == 3 ? g.dims[2] : 1;
    for (int k = 0; k < nk; ++k)
      for (int j = 1; j < g.dims[1] - 1; ++j)
        for (int i = 1; i < g.dims[0] - 1; ++i) {
          if (d == 3 && (k == 0 || k == g.dims[2] - 1)) continue;
          interior_candidates.push_back(g.voxel_center(i, j, k));
        }
  }
  const auto interior =
      farthest_point_sample(interior_candidates, variable, n_interior);
  variable.insert(variable.end(), interior.begin(), interior.end());

  if (static_cast<int>(variable.size()) != n_points)
    throw MeshInitError("could not place the requested number of mesh points");

  // fixed frame corners outside the image keep the hull static
  double max_extent = 0.0;
  for (int a = 0; a < d; ++a) max_extent = std::max(max_extent, g.extent()[a]);
  const double frame_offset = 0.25 * max_extent;
  const std::vector<WorldPoint> frame = domain_corners(g, frame_offset);
  const Vec3 frame_lo = g.domain_min() - Vec3{frame_offset, frame_offset, frame_offset};
  const Vec3 frame_hi = g.domain_max() + Vec3{frame_offset, frame_offset, frame_offset};

  double min_spacing = g.spacing[0];
  for (int a = 1; a < d; ++a) min_spacing = std::min(min_spacing, g.spacing[a]);

  for (int attempt = 0; attempt < 8; ++attempt) {
    // symmetry-breaking jitter on every point, frame included: exactly
    // coplanar or cospherical box corners break the incremental cavity
    std::vector<WorldPoint> pts = variable;
    pts.insert(pts.end(), frame.begin(), frame.end());
    for (std::size_t i = 0; i < pts.size(); ++i)
      pts[i] += hash_jitter(static_cast<int>(i), attempt, 0.05 * min_spacing, d);

    DualMesh mesh;
    mesh.ndims = d;
    mesh.target_points = pts;
    mesh.source_points = pts;
    mesh.n_variable = n_points;
    try {
      mesh.simplices = delaunay_triangulate(pts, d);
      mesh.finalize();
      validate_tiling(mesh, g, frame_lo, frame_hi);
    } catch (const MeshInitError&) {
      if (attempt == 7) throw;
      continue;
    }
    return mesh;
  }
  throw MeshInitError("mesh construction failed");
}

// ---------------------------------------------------------------------------
// Point location and transform
// ---------------------------------------------------------------------------

BarycentricLocation barycentric_in(const DualMesh& mesh, int simplex,
                                   const WorldPoint& p) {
  const auto& s = mesh.simplices[simplex];
  const WorldPoint& v0 = mesh.target_points[s[0]];
  BarycentricLocation loc;
  loc.simplex = simplex;
  if (mesh.ndims == 2) {
    const Vec3 e1 = mesh.target_points[s[1]] - v0;
    const Vec3 e2 = mesh.target_points[s[2]] - v0;
    const Vec3 r = p - v0;
    const double det = e1.x * e2.y - e1.y * e2.x;
    const double l1 = (r.x * e2.y - r.y * e2.x) / det;
    const double l2 = (e1.x * r.y - e1.y * r.x) / det;
    loc.coords = {1.0 - l1 - l2, l1, l2, 0.0};
  } else {
    const Vec3 e1 = mesh.target_points[s[1]] - v0;
    const Vec3 e2 = mesh.target_points[s[2]] - v0;
    const Vec3 e3 = mesh.target_points[s[3]] - v0;
    const Vec3 r = p - v0;
    const double det = e1.dot({e2.y * e3.z - e2.z * e3.y,
                               e2.z * e3.x - e2.x * e3.z,
                               e2.x * e3.y - e2.y * e3.x});
    const auto solve = [&](const Vec3& a, const Vec3& b, const Vec3& c) {
      return a.dot({b.y * c.z - b.z * c.y, b.z * c.x - b.x * c.z,
                    b.x * c.y - b.y * c.x}) / det;
    };
    const double l1 = solve(r, e2, e3);
    const double l2 = solve(e1, r, e3);
    const double l3 = solve(e1, e2, r);
    loc.coords = {1.0 - l1 - l2 - l3, l1, l2, l3};
  }
  return loc;
}

namespace {

constexpr double kBaryTol = 1e-9;

bool location_inside(const BarycentricLocation& loc, int ndims) {
  for (int q = 0; q <= ndims; ++q)
    if (loc.coords[q] < -kBaryTol) return false;
  return true;
}

}  // namespace

BarycentricLocation locate_brute(const DualMesh& mesh, const WorldPoint& p) {
  for (std::size_t s = 0; s < mesh.simplices.size(); ++s) {
    const BarycentricLocation loc = barycentric_in(mesh, static_cast<int>(s), p);
    if (location_inside(loc, mesh.ndims)) return loc;
  }
  throw LocationError("point outside the target mesh hull");
}

BarycentricLocation locate(const DualMesh& mesh, const WorldPoint& p) {
  return locate_brute(mesh, p);
}

MeshLocator::MeshLocator(const DualMesh& mesh) : mesh_(mesh) {
  Vec3 lo = mesh.target_points[0], hi = mesh.target_points[0];
  for (const WorldPoint& p : mesh.target_points)
    for (int a = 0; a < mesh.ndims; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  lo_ = lo;
  const int per_axis = std::max(
      2, static_cast<int>(std::floor(std::pow(
             static_cast<double>(mesh.simplices.size()), 1.0 / mesh.ndims))));
  std::size_t total = 1;
  for (int a = 0; a < mesh.ndims; ++a) {
    res_[a] = per_axis;
    const double span = std::max(hi[a] - lo[a], 1e-12);
    inv_cell_[a] = res_[a] / span;
    total *= res_[a];
  }
  cells_.assign(total, {});
  for (std::size_t s = 0; s < mesh.simplices.size(); ++s) {
    Vec3 blo = mesh.target_points[mesh.simplices[s][0]];
    Vec3 bhi = blo;
    for (int q = 1; q <= mesh.ndims; ++q) {
      const WorldPoint& v = mesh.target_points[mesh.simplices[s][q]];
      for (int a = 0; a < mesh.ndims; ++a) {
        blo[a] = std::min(blo[a], v[a]);
        bhi[a] = std::max(bhi[a], v[a]);
      }
    }
    std::array<int, 3> clo{0, 0, 0}, chi{0, 0, 0};
    for (int a = 0; a < mesh.ndims; ++a) {
      clo[a] = std::clamp(static_cast<int>((blo[a] - lo_[a]) * inv_cell_[a]), 0,
                          res_[a] - 1);
      chi[a] = std::clamp(static_cast<int>((bhi[a] - lo_[a]) * inv_cell_[a]), 0,
                          res_[a] - 1);
    }
    const int kmax = mesh.ndims == 3 ? chi[2] : 0;
    const int kmin = mesh.ndims == 3 ? clo[2] : 0;
    for (int k = kmin; k <= kmax; ++k)
      for (int j = clo[1]; j <= chi[1]; ++j)
        for (int i = clo[0]; i <= chi[0]; ++i)
          cells_[(static_cast<std::size_t>(k) * res_[1] + j) * res_[0] + i]
              .push_back(static_cast<int>(s));
  }
}

std::size_t MeshLocator::cell_of(const WorldPoint& p) const {
  std::array<int, 3> c{0, 0, 0};
  for (int a = 0; a < mesh_.ndims; ++a)
    c[a] = std::clamp(static_cast<int>((p[a] - lo_[a]) * inv_cell_[a]), 0,
                      res_[a] - 1);
  return (static_cast<std::size_t>(c[2]) * res_[1] + c[1]) * res_[0] + c[0];
}

BarycentricLocation MeshLocator::locate(const WorldPoint& p) const {
  // candidate lists are index-sorted, so the first hit is the lowest-index
  // containing simplex, matching locate_brute
  for (int s : cells_[cell_of(p)]) {
    const BarycentricLocation loc = barycentric_in(mesh_, s, p);
    if (location_inside(loc, mesh_.ndims)) return loc;
  }
  throw LocationError("point outside the target mesh hull");
}

BarycentricLocation MeshLocator::locate_or_nearest(const WorldPoint& p) const {
  try {
    return locate(p);
  } catch (const LocationError&) {
    // nearest hull simplex by centroid, affine extension
    const auto centroid_dist = [&](int s) {
      Vec3 c;
      for (int q = 0; q <= mesh_.ndims; ++q)
        c += mesh_.target_points[mesh_.simplices[s][q]];
      c = c * (1.0 / (mesh_.ndims + 1));
      return (c - p).norm2();
    };
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    if (!mesh_.hull_simplices.empty()) {
      for (int s : mesh_.hull_simplices) {
        const double d2 = centroid_dist(s);
        if (d2 < best_d) {
          best_d = d2;
          best = s;
        }
      }
    } else {
      for (std::size_t s = 0; s < mesh_.simplices.size(); ++s) {
        const double d2 = centroid_dist(static_cast<int>(s));
        if (d2 < best_d) {
          best_d = d2;
          best = static_cast<int>(s);
        }
      }
    }
    return barycentric_in(mesh_, best, p);
  }
}

WorldPoint apply_location(const DualMesh& mesh, const BarycentricLocation& loc) {
  const auto& s = mesh.simplices[loc.simplex];
  Vec3 out;
  for (int q = 0; q <= mesh.ndims; ++q)
    out += loc.coords[q] * mesh.source_points[s[q]];
  return out;
}

WorldPoint transform_point(const DualMesh& mesh, const WorldPoint& p) {
  return apply_location(mesh, locate_brute(mesh, p));
}

// ---------------------------------------------------------------------------
// Fold check and edge energy
// ---------------------------------------------------------------------------

bool simplex_fold_free(const DualMesh& mesh, int simplex) {
  const double ref = mesh.reference_volumes[simplex];
  const double floor = kVolumeFloorFraction * std::abs(ref);
  const double tv = mesh.target_volume(simplex);
  const double sv = mesh.source_volume(simplex);
  const double sign = ref >= 0.0 ? 1.0 : -1.0;
  return sign * tv >= floor && sign * sv >= floor;
}

bool is_fold_free(const DualMesh& mesh) {
  for (std::size_t s = 0; s < mesh.simplices.size(); ++s)
    if (!simplex_fold_free(mesh, static_cast<int>(s))) return false;
  return true;
}

int fold_violation_count(const DualMesh& mesh) {
  int count = 0;
  for (std::size_t s = 0; s < mesh.simplices.size(); ++s) {
    const double ref = mesh.reference_volumes[s];
    const double floor = kVolumeFloorFraction * std::abs(ref);
    const double sign = ref >= 0.0 ? 1.0 : -1.0;
    if (sign * mesh.target_volume(static_cast<int>(s)) < floor) ++count;
    if (sign * mesh.source_volume(static_cast<int>(s)) < floor) ++count;
  }
  return count;
}

int edge_pairs_per_simplex(int ndims) {
  // all vertex pairs plus one spoke per vertex
  return (ndims + 1) * ndims / 2 + (ndims + 1);
}

double simplex_edge_term(const DualMesh& mesh, int simplex) {
  const auto& s = mesh.simplices[simplex];
  const int d = mesh.ndims;
  double sum = 0.0;
  for (int q = 0; q <= d; ++q)
    for (int r = q + 1; r <= d; ++r) {
      const double lt = (mesh.target_points[s[q]] - mesh.target_points[s[r]]).norm();
      const double ls = (mesh.source_points[s[q]] - mesh.source_points[s[r]]).norm();
      sum += (ls - lt) * (ls - lt);
    }
  // spokes: vertex to the centroid of the opposite facet
  for (int q = 0; q <= d; ++q) {
    Vec3 ct, cs;
    for (int r = 0; r <= d; ++r) {
      if (r == q) continue;
      ct += mesh.target_points[s[r]];
      cs += mesh.source_points[s[r]];
    }
    ct = ct * (1.0 / d);
    cs = cs * (1.0 / d);
    const double lt = (mesh.target_points[s[q]] - ct).norm();
    const double ls = (mesh.source_points[s[q]] - cs).norm();
    sum += (ls - lt) * (ls - lt);
  }
  return sum;
}

double edge_energy(const DualMesh& mesh) {
  if (mesh.simplices.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t s = 0; s < mesh.simplices.size(); ++s)
    sum += simplex_edge_term(mesh, static_cast<int>(s));
  return sum / (static_cast<double>(edge_pairs_per_simplex(mesh.ndims)) *
                mesh.simplices.size());
}

const std::vector<int>& affected_simplices(const DualMesh& mesh,
                                           int point_index) {
  return mesh.incident.at(point_index);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

void write_mesh(const DualMesh& mesh, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os.precision(17);
  os << "NDims: " << mesh.ndims << "\n";
  os << "Points: " << mesh.point_count() << "\n";
  os << "VariablePoints: " << mesh.n_variable << "\n";
  os << "Simplices: " << mesh.simplices.size() << "\n";
  os << "TARGET_POINTS\n";
  for (const WorldPoint& p : mesh.target_points) {
    for (int a = 0; a < mesh.ndims; ++a) os << (a ? " " : "") << p[a];
    os << "\n";
  }
  os << "SOURCE_POINTS\n";
  for (const WorldPoint& p : mesh.source_points) {
    for (int a = 0; a < mesh.ndims; ++a) os << (a ? " " : "") << p[a];
    os << "\n";
  }
  os << "SIMPLICES\n";
  for (const auto& s : mesh.simplices) {
    for (int q = 0; q <= mesh.ndims; ++q) os << (q ? " " : "") << s[q];
    os << "\n";
  }
  os << "REFERENCE_VOLUMES\n";
  for (double v : mesh.reference_volumes) os << v << "\n";
  if (!os) throw IoError("failed writing " + path);
}

DualMesh read_mesh(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  DualMesh mesh;
  std::size_t n_points = 0, n_simplices = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (line == "TARGET_POINTS") break;
    const auto colon = line.find(':');
    if (colon == std::string::npos)
      throw MalformedHeaderError(path + ": bad mesh header line '" + line + "'");
    const std::string key = line.substr(0, colon);
    std::istringstream vals(line.substr(colon + 1));
    if (key == "NDims") {
      if (!(vals >> mesh.ndims) || (mesh.ndims != 2 && mesh.ndims != 3))
        throw MalformedHeaderError(path + ": NDims must be 2 or 3");
    } else if (key == "Points") {
      vals >> n_points;
    } else if (key == "VariablePoints") {
      vals >> mesh.n_variable;
    } else if (key == "Simplices") {
      vals >> n_simplices;
    } else {
      throw MalformedHeaderError(path + ": unknown mesh header key '" + key + "'");
    }
  }
  if (n_points == 0 || n_simplices == 0)
    throw MalformedHeaderError(path + ": empty mesh header");

  auto read_points = [&](std::vector<WorldPoint>& out) {
    out.resize(n_points);
    for (std::size_t p = 0; p < n_points; ++p)
      for (int a = 0; a < mesh.ndims; ++a)
        if (!(is >> out[p][a]))
          throw TruncatedPayloadError(path + ": fewer points than declared");
  };
  read_points(mesh.target_points);
  is >> line;
  if (line != "SOURCE_POINTS")
    throw MalformedHeaderError(path + ": missing SOURCE_POINTS");
  read_points(mesh.source_points);
  is >> line;
  if (line != "SIMPLICES")
    throw MalformedHeaderError(path + ": missing SIMPLICES");
  mesh.simplices.resize(n_simplices);
  for (std::size_t s = 0; s < n_simplices; ++s) {
    mesh.simplices[s] = {-1, -1, -1, -1};
    for (int q = 0; q <= mesh.ndims; ++q)
      if (!(is >> mesh.simplices[s][q]))
        throw TruncatedPayloadError(path + ": fewer simplices than declared");
  }
  is >> line;
  if (line != "REFERENCE_VOLUMES")
    throw MalformedHeaderError(path + ": missing REFERENCE_VOLUMES");
  mesh.reference_volumes.resize(n_simplices);
  for (std::size_t s = 0; s < n_simplices; ++s)
    if (!(is >> mesh.reference_volumes[s]))
      throw TruncatedPayloadError(path + ": fewer reference volumes than declared");
  mesh.finalize();
  return mesh;
}

}  // namespace dirw
