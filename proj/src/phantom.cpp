#include "dirw/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace dirw {

namespace {

struct Ellipsoid {
  Vec3 center;
  Vec3 radii;
  double intensity;
  bool textured;

  // normalized coordinates inside the ellipsoid, components in [-1, 1]
  bool contains(const WorldPoint& p, int ndims, Vec3& n) const {
    double q = 0.0;
    for (int a = 0; a < ndims; ++a) {
      n[a] = (p[a] - center[a]) / radii[a];
      q += n[a] * n[a];
    }
    return q <= 1.0;
  }
};

void check_inside(const GridGeometry& g, const Ellipsoid& e, double margin,
                  const char* name) {
  for (int a = 0; a < g.ndims; ++a) {
    const double lo = g.domain_min()[a] + margin;
    const double hi = g.domain_max()[a] - margin;
    if (e.center[a] - e.radii[a] < lo || e.center[a] + e.radii[a] > hi)
      throw ConfigError(std::string("phantom structure '") + name +
                        "' exceeds image bounds after margin");
  }
}

}  // namespace

void PhantomSpec::validate() const {
  if (geom.ndims != 2 && geom.ndims != 3)
    throw ConfigError("phantom must have 2 or 3 axes");
  for (int a = 0; a < geom.ndims; ++a) {
    if (geom.dims[a] < 8) throw ConfigError("phantom image too small");
    if (!(geom.spacing[a] > 0.0)) throw ConfigError("phantom spacing invalid");
    if (!(source_radii[a] > 0.0) || !(target_radii[a] > 0.0))
      throw ConfigError("phantom blob radii must be strictly positive");
  }
  if (blob_intensity == background || bone_intensity == background ||
      tube_intensity == background)
    throw ConfigError("structure intensities must differ from background");
}

ScalarImage generate_phantom(const PhantomSpec& spec, PhantomState state,
                             std::uint64_t seed) {
  spec.validate();
  const GridGeometry& g = spec.geom;
  const bool source = state == PhantomState::Source;
  const Vec3 blob_r = source ? spec.source_radii : spec.target_radii;

  std::vector<Ellipsoid> structures;

  if (spec.kind == PhantomKind::MultiOrgan) {
    // Rigid bone-like structures flank the blob; geometry is shared by both
    // states so the rendered voxels are bit-identical.
    const double rmax = std::max(spec.source_radii.x, spec.source_radii.y);
    const double bone_r = 0.35 * rmax;
    const double gap = 0.25 * rmax;
    for (double side : {-1.0, +1.0}) {
      Ellipsoid bone;
      bone.center = spec.blob_center;
      bone.center.x += side * (spec.source_radii.x + gap + bone_r);
      bone.radii = {bone_r, bone_r, bone_r};
      bone.intensity = spec.bone_intensity;
      bone.textured = false;
      check_inside(g, bone, spec.margin_mm, "bone");
      structures.push_back(bone);
    }
    // Two deformable tube-like structures below the blob; in the target
    // state they ride up toward the emptied blob.
    const double shift =
        source ? 0.0 : 0.45 * (spec.source_radii.y - spec.target_radii.y);
    for (int t = 0; t < 2; ++t) {
      Ellipsoid tube;
      tube.center = spec.blob_center;
      tube.center.y -= spec.source_radii.y + gap + (0.55 + 0.75 * t) * rmax * 0.5;
      tube.center.y += shift;
      tube.radii = {0.9 * rmax, 0.22 * rmax, 0.22 * rmax};
      tube.intensity = spec.tube_intensity;
      tube.textured = true;
      check_inside(g, tube, spec.margin_mm, "tube");
      structures.push_back(tube);
    }
  }

  Ellipsoid blob;
  blob.center = spec.blob_center;
  blob.radii = blob_r;
  blob.intensity = spec.blob_intensity;
  blob.textured = true;
  // both states must stay inside bounds, not just the rendered one
  check_inside(g, {spec.blob_center, spec.source_radii, 0, false},
               spec.margin_mm, "blob");
  check_inside(g, {spec.blob_center, spec.target_radii, 0, false},
               spec.margin_mm, "blob");
  structures.push_back(blob);

  // seed rotates the texture gradient in the xy plane
  Rng rng(seed);
  const double phase = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  const Vec3 tex_dir{std::cos(phase), std::sin(phase), 0.5};

  ScalarImage img;
  img.geom = g;
  img.voxels.assign(g.voxel_count(), static_cast<float>(spec.background));

  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        const WorldPoint p = g.voxel_center(i, j, k);
        for (const Ellipsoid& e : structures) {
          Vec3 n;
          if (!e.contains(p, g.ndims, n)) continue;
          double v = e.intensity;
          if (e.textured) {
            // smooth gradient over normalized position: intensity follows
            // the material point, so a correct warp maps texture to texture
            double t = 0.0;
            for (int a = 0; a < g.ndims; ++a) t += n[a] * tex_dir[a];
            v *= 1.0 + spec.texture_amplitude * t / g.ndims;
          }
          img.at(i, j, k) = static_cast<float>(v);
        }
      }
  return img;
}

PhantomSpec desk_phantom_spec(PhantomKind kind) {
  PhantomSpec spec;
  spec.kind = kind;
  spec.geom.ndims = 2;
  spec.geom.dims = {64, 64, 1};
  spec.geom.spacing = {3.0, 3.0, 1.0};
  spec.geom.origin = {0.0, 0.0, 0.0};
  const Vec3 center{63.0 * 3.0 / 2.0, 63.0 * 3.0 / 2.0, 0.0};
  spec.blob_center = center;
  if (kind == PhantomKind::MultiOrgan) {
    // leave room for the flanking bones and tubes
    spec.blob_center.y += 18.0;
    spec.source_radii = {36.0, 40.0, 0.0};
    spec.target_radii = {24.0, 25.0, 0.0};
  } else {
    spec.source_radii = {48.0, 52.0, 0.0};
    spec.target_radii = {28.0, 30.0, 0.0};
  }
  spec.margin_mm = 6.0;
  return spec;
}

}  // namespace dirw
