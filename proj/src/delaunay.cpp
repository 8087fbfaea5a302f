#include "dirw/delaunay.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace dirw {

double simplex_signed_volume(const WorldPoint* verts, int ndims) {
  if (ndims == 2) {
    const Vec3 u = verts[1] - verts[0];
    const Vec3 v = verts[2] - verts[0];
    return 0.5 * (u.x * v.y - u.y * v.x);
  }
  const Vec3 u = verts[1] - verts[0];
  const Vec3 v = verts[2] - verts[0];
  const Vec3 w = verts[3] - verts[0];
  const double det = u.x * (v.y * w.z - v.z * w.y) -
                     u.y * (v.x * w.z - v.z * w.x) +
                     u.z * (v.x * w.y - v.y * w.x);
  return det / 6.0;
}

namespace {

double det3(double m[3][3]) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

double det4(double m[4][4]) {
  double sum = 0.0;
  for (int c = 0; c < 4; ++c) {
    double minor[3][3];
    for (int r = 1; r < 4; ++r) {
      int cc = 0;
      for (int c2 = 0; c2 < 4; ++c2) {
        if (c2 == c) continue;
        minor[r - 1][cc++] = m[r][c2];
      }
    }
    sum += ((c % 2) ? -1.0 : 1.0) * m[0][c] * det3(minor);
  }
  return sum;
}

// positive when q lies inside the circumsphere of the positively oriented
// simplex
double insphere(const std::vector<WorldPoint>& pts,
                const std::array<int, 4>& simplex, const WorldPoint& q,
                int ndims, double orientation_sign) {
  if (ndims == 2) {
    double m[3][3];
    for (int r = 0; r < 3; ++r) {
      const Vec3 d = pts[simplex[r]] - q;
      m[r][0] = d.x;
      m[r][1] = d.y;
      m[r][2] = d.x * d.x + d.y * d.y;
    }
    return det3(m) * orientation_sign;
  }
  double m[4][4];
  for (int r = 0; r < 4; ++r) {
    const Vec3 d = pts[simplex[r]] - q;
    m[r][0] = d.x;
    m[r][1] = d.y;
    m[r][2] = d.z;
    m[r][3] = d.norm2();
  }
  // for a positively oriented tetrahedron the lifted determinant is
  // negative when q is inside
  return -det4(m) * orientation_sign;
}

double signed_volume_of(const std::vector<WorldPoint>& pts,
                        const std::array<int, 4>& s, int ndims) {
  WorldPoint v[4];
  for (int q = 0; q <= ndims; ++q) v[q] = pts[s[q]];
  return simplex_signed_volume(v, ndims);
}

using Face = std::array<int, 3>;  // sorted vertex ids, 2 used in 2D

Face face_of(const std::array<int, 4>& s, int skip, int ndims) {
  Face f{-1, -1, -1};
  int w = 0;
  for (int q = 0; q <= ndims; ++q)
    if (q != skip) f[w++] = s[q];
  std::sort(f.begin(), f.begin() + ndims);
  return f;
}

}  // namespace

std::vector<std::array<int, 4>> delaunay_triangulate(
    const std::vector<WorldPoint>& points, int ndims) {
  const int n = static_cast<int>(points.size());
  if (n < ndims + 1) throw MeshInitError("too few points to triangulate");

  // bounding box and scale
  Vec3 lo = points[0], hi = points[0];
  for (const WorldPoint& p : points)
    for (int a = 0; a < ndims; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  const Vec3 c = 0.5 * (lo + hi);
  double diag = 0.0;
  for (int a = 0; a < ndims; ++a) diag += (hi[a] - lo[a]) * (hi[a] - lo[a]);
  diag = std::max(std::sqrt(diag), 1.0);
  const double scale = 20.0 * diag;
  const double vol_floor = std::pow(1e-9 * diag, ndims) / 6.0;

  std::vector<WorldPoint> pts = points;
  std::array<int, 4> super{n, n + 1, n + 2, n + 3};
  if (ndims == 2) {
    pts.push_back({c.x - 2.0 * scale, c.y - scale, 0.0});
    pts.push_back({c.x + 2.0 * scale, c.y - scale, 0.0});
    pts.push_back({c.x, c.y + 2.0 * scale, 0.0});
    super[3] = -1;
  } else {
    pts.push_back({c.x + scale, c.y + scale, c.z + scale});
    pts.push_back({c.x + scale, c.y - scale, c.z - scale});
    pts.push_back({c.x - scale, c.y + scale, c.z - scale});
    pts.push_back({c.x - scale, c.y - scale, c.z + scale});
  }

  struct Simp {
    std::array<int, 4> v;
    double orient_sign;
    bool alive{true};
  };
  std::vector<Simp> simps;
  {
    Simp s0{super, 0.0, true};
    const double vol = signed_volume_of(pts, super, ndims);
    s0.orient_sign = vol >= 0.0 ? 1.0 : -1.0;
    simps.push_back(s0);
  }

  std::vector<int> bad;
  std::map<Face, int> face_count;
  for (int pi = 0; pi < n; ++pi) {
    const WorldPoint& q = pts[pi];
    bad.clear();
    for (int si = 0; si < static_cast<int>(simps.size()); ++si) {
      if (!simps[si].alive) continue;
      if (insphere(pts, simps[si].v, q, ndims, simps[si].orient_sign) > 0.0)
        bad.push_back(si);
    }
    if (bad.empty())
      throw MeshInitError("triangulation cavity empty (degenerate input)");

    face_count.clear();
    for (int si : bad)
      for (int skip = 0; skip <= ndims; ++skip)
        face_count[face_of(simps[si].v, skip, ndims)]++;
    for (int si : bad) simps[si].alive = false;

    for (const auto& [face, count] : face_count) {
      if (count != 1) continue;  // interior cavity face
      Simp ns;
      if (ndims == 2)
        ns.v = {face[0], face[1], pi, -1};
      else
        ns.v = {face[0], face[1], face[2], pi};
      const double vol = signed_volume_of(pts, ns.v, ndims);
      if (std::abs(vol) < vol_floor)
        throw MeshInitError("degenerate simplex during triangulation");
      ns.orient_sign = vol >= 0.0 ? 1.0 : -1.0;
      simps.push_back(ns);
    }
  }

  std::vector<std::array<int, 4>> result;
  for (const Simp& s : simps) {
    if (!s.alive) continue;
    bool uses_super = false;
    for (int q = 0; q <= ndims; ++q)
      if (s.v[q] >= n) uses_super = true;
    if (uses_super) continue;
    std::array<int, 4> out = s.v;
    if (signed_volume_of(pts, out, ndims) < 0.0) std::swap(out[0], out[1]);
    if (ndims == 2) out[3] = -1;
    result.push_back(out);
  }
  if (result.empty()) throw MeshInitError("triangulation produced no simplices");
  return result;
}

}  // namespace dirw
