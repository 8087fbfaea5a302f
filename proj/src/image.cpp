#include "dirw/image.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dirw {

void ScalarImage::validate() const {
  if (geom.ndims != 2 && geom.ndims != 3)
    throw ConfigError("image must have 2 or 3 axes");
  for (int a = 0; a < geom.ndims; ++a) {
    if (geom.dims[a] <= 0) throw ConfigError("image dims must be positive");
    if (!(geom.spacing[a] > 0.0))
      throw ConfigError("image spacing must be strictly positive");
  }
  if (voxels.size() != geom.voxel_count())
    throw ConfigError("voxel count does not match dims");
  for (float v : voxels)
    if (!std::isfinite(v)) throw ConfigError("image contains non-finite voxels");
}

namespace {

struct StencilD {
  int lo[3];       // lower voxel index per axis, clamped
  int hi[3];       // upper voxel index per axis, clamped
  double frac[3];  // interpolation fraction in [0,1]
};

StencilD make_stencil(const GridGeometry& g, const WorldPoint& p) {
  StencilD s{};
  for (int a = 0; a < 3; ++a) {
    if (a >= g.ndims) {
      s.lo[a] = s.hi[a] = 0;
      s.frac[a] = 0.0;
      continue;
    }
    double u = (p[a] - g.origin[a]) / g.spacing[a];
    // clamp to the voxel-center hull before interpolation
    u = std::clamp(u, 0.0, static_cast<double>(g.dims[a] - 1));
    int i0 = static_cast<int>(std::floor(u));
    if (i0 > g.dims[a] - 2) i0 = std::max(0, g.dims[a] - 2);
    s.lo[a] = i0;
    s.hi[a] = std::min(i0 + 1, g.dims[a] - 1);
    s.frac[a] = u - i0;
  }
  return s;
}

}  // namespace

double interpolate(const ScalarImage& image, const WorldPoint& p) {
  const GridGeometry& g = image.geom;
  const StencilD s = make_stencil(g, p);
  double acc = 0.0;
  for (int ck = 0; ck <= (g.ndims == 3 ? 1 : 0); ++ck) {
    const double wk = g.ndims == 3 ? (ck ? s.frac[2] : 1.0 - s.frac[2]) : 1.0;
    const int k = ck ? s.hi[2] : s.lo[2];
    for (int cj = 0; cj <= 1; ++cj) {
      const double wj = cj ? s.frac[1] : 1.0 - s.frac[1];
      const int j = cj ? s.hi[1] : s.lo[1];
      for (int ci = 0; ci <= 1; ++ci) {
        const double wi = ci ? s.frac[0] : 1.0 - s.frac[0];
        const int i = ci ? s.hi[0] : s.lo[0];
        acc += wk * wj * wi * image.at(i, j, k);
      }
    }
  }
  return acc;
}

Vec3 interpolate_gradient(const ScalarImage& image, const WorldPoint& p) {
  const GridGeometry& g = image.geom;
  const StencilD s = make_stencil(g, p);
  Vec3 grad;
  for (int axis = 0; axis < g.ndims; ++axis) {
    double acc = 0.0;
    for (int ck = 0; ck <= (g.ndims == 3 ? 1 : 0); ++ck) {
      const int k = ck ? s.hi[2] : s.lo[2];
      double wk;
      if (g.ndims < 3)
        wk = 1.0;
      else if (axis == 2)
        wk = ck ? 1.0 : -1.0;
      else
        wk = ck ? s.frac[2] : 1.0 - s.frac[2];
      for (int cj = 0; cj <= 1; ++cj) {
        const int j = cj ? s.hi[1] : s.lo[1];
        const double wj = (axis == 1) ? (cj ? 1.0 : -1.0)
                                      : (cj ? s.frac[1] : 1.0 - s.frac[1]);
        for (int ci = 0; ci <= 1; ++ci) {
          const int i = ci ? s.hi[0] : s.lo[0];
          const double wi = (axis == 0) ? (ci ? 1.0 : -1.0)
                                        : (ci ? s.frac[0] : 1.0 - s.frac[0]);
          acc += wk * wj * wi * image.at(i, j, k);
        }
      }
    }
    // degenerate stencil at the boundary: slope is zero there
    grad[axis] = (s.hi[axis] > s.lo[axis]) ? acc / g.spacing[axis] : 0.0;
  }
  return grad;
}

Vec3 interpolate_dvf(const DeformationField& field, const WorldPoint& p) {
  const GridGeometry& g = field.geom;
  const StencilD s = make_stencil(g, p);
  Vec3 acc;
  for (int ck = 0; ck <= (g.ndims == 3 ? 1 : 0); ++ck) {
    const double wk = g.ndims == 3 ? (ck ? s.frac[2] : 1.0 - s.frac[2]) : 1.0;
    const int k = ck ? s.hi[2] : s.lo[2];
    for (int cj = 0; cj <= 1; ++cj) {
      const double wj = cj ? s.frac[1] : 1.0 - s.frac[1];
      const int j = cj ? s.hi[1] : s.lo[1];
      for (int ci = 0; ci <= 1; ++ci) {
        const double wi = ci ? s.frac[0] : 1.0 - s.frac[0];
        const int i = ci ? s.hi[0] : s.lo[0];
        acc += (wk * wj * wi) * field.at(i, j, k);
      }
    }
  }
  return acc;
}

DeformationField rasterize_dvf(
    const std::function<WorldPoint(const WorldPoint&)>& transform,
    const GridGeometry& geometry) {
  DeformationField field;
  field.geom = geometry;
  field.vectors.resize(geometry.voxel_count());
  for (int k = 0; k < geometry.dims[2]; ++k)
    for (int j = 0; j < geometry.dims[1]; ++j)
      for (int i = 0; i < geometry.dims[0]; ++i) {
        const WorldPoint p = geometry.voxel_center(i, j, k);
        field.at(i, j, k) = transform(p) - p;
      }
  return field;
}

// ---------------------------------------------------------------------------
// File I/O
// ---------------------------------------------------------------------------

namespace {

void write_header(std::ostream& os, const GridGeometry& g) {
  os << "NDims: " << g.ndims << "\n";
  os << "DimSize:";
  for (int a = 0; a < g.ndims; ++a) os << " " << g.dims[a];
  os << "\nElementSpacing:";
  for (int a = 0; a < g.ndims; ++a) os << " " << g.spacing[a];
  os << "\nOrigin:";
  for (int a = 0; a < g.ndims; ++a) os << " " << g.origin[a];
  os << "\nElementType: float32\n";
  os << "DATA\n";
}

GridGeometry read_header(std::istream& is, const std::string& path) {
  GridGeometry g;
  bool have_ndims = false, have_dims = false, have_type = false;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "DATA") {
      if (!have_ndims || !have_dims || !have_type)
        throw MalformedHeaderError(path + ": missing required header keys");
      return g;
    }
    const auto colon = line.find(':');
    if (colon == std::string::npos)
      throw MalformedHeaderError(path + ": bad header line '" + line + "'");
    const std::string key = line.substr(0, colon);
    std::istringstream vals(line.substr(colon + 1));
    if (key == "NDims") {
      if (!(vals >> g.ndims) || (g.ndims != 2 && g.ndims != 3))
        throw MalformedHeaderError(path + ": NDims must be 2 or 3");
      have_ndims = true;
    } else if (key == "DimSize") {
      if (!have_ndims) throw MalformedHeaderError(path + ": DimSize before NDims");
      for (int a = 0; a < g.ndims; ++a)
        if (!(vals >> g.dims[a]) || g.dims[a] <= 0)
          throw MalformedHeaderError(path + ": bad DimSize");
      have_dims = true;
    } else if (key == "ElementSpacing") {
      if (!have_ndims)
        throw MalformedHeaderError(path + ": ElementSpacing before NDims");
      for (int a = 0; a < g.ndims; ++a)
        if (!(vals >> g.spacing[a]) || !(g.spacing[a] > 0.0))
          throw MalformedHeaderError(path + ": bad ElementSpacing");
    } else if (key == "Origin") {
      if (!have_ndims) throw MalformedHeaderError(path + ": Origin before NDims");
      for (int a = 0; a < g.ndims; ++a)
        if (!(vals >> g.origin[a]))
          throw MalformedHeaderError(path + ": bad Origin");
    } else if (key == "ElementType") {
      std::string t;
      vals >> t;
      if (t != "float32")
        throw MalformedHeaderError(path + ": unknown element type '" + t + "'");
      have_type = true;
    } else {
      throw MalformedHeaderError(path + ": unknown header key '" + key + "'");
    }
  }
  throw MalformedHeaderError(path + ": missing DATA line");
}

std::vector<float> read_payload(std::istream& is, std::size_t count,
                                const std::string& path) {
  std::vector<float> data(count);
  is.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (static_cast<std::size_t>(is.gcount()) != count * sizeof(float))
    throw TruncatedPayloadError(path + ": payload shorter than header declares");
  // anything left over means the header undersells the payload
  char probe;
  if (is.read(&probe, 1))
    throw DimensionMismatchError(path + ": payload larger than header declares");
  return data;
}

}  // namespace

void write_image(const ScalarImage& image, const std::string& path) {
  image.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_header(os, image.geom);
  os.write(reinterpret_cast<const char*>(image.voxels.data()),
           static_cast<std::streamsize>(image.voxels.size() * sizeof(float)));
  if (!os) throw IoError("failed writing " + path);
}

ScalarImage read_image(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  ScalarImage img;
  img.geom = read_header(is, path);
  img.voxels = read_payload(is, img.geom.voxel_count(), path);
  img.validate();
  return img;
}

void write_dvf(const DeformationField& field, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_header(os, field.geom);
  const int d = field.geom.ndims;
  std::vector<float> flat;
  flat.reserve(field.vectors.size() * d);
  for (const Vec3& v : field.vectors)
    for (int a = 0; a < d; ++a) flat.push_back(static_cast<float>(v[a]));
  os.write(reinterpret_cast<const char*>(flat.data()),
           static_cast<std::streamsize>(flat.size() * sizeof(float)));
  if (!os) throw IoError("failed writing " + path);
}

DeformationField read_dvf(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  DeformationField field;
  field.geom = read_header(is, path);
  const int d = field.geom.ndims;
  const std::vector<float> flat =
      read_payload(is, field.geom.voxel_count() * d, path);
  field.vectors.resize(field.geom.voxel_count());
  for (std::size_t v = 0; v < field.vectors.size(); ++v)
    for (int a = 0; a < d; ++a) field.vectors[v][a] = flat[v * d + a];
  return field;
}

}  // namespace dirw
