#pragma once

#include <cstdint>

#include "dirw/image.hpp"

namespace dirw {

enum class PhantomKind { IsolatedBlob, MultiOrgan };
enum class PhantomState { Source, Target };

// Synthetic registration problem: a deformable blob (large in the source
// state, small in the target state), optionally surrounded by rigid bone-like
// structures and two deformable tubes.
struct PhantomSpec {
  PhantomKind kind{PhantomKind::IsolatedBlob};
  GridGeometry geom;            // image dims/spacing/origin
  Vec3 blob_center;             // world mm
  Vec3 source_radii;            // blob radii in the source (full) state
  Vec3 target_radii;            // blob radii in the target (empty) state
  double background{0.0};
  double blob_intensity{1.0};
  double bone_intensity{2.0};
  double tube_intensity{0.6};
  double margin_mm{6.0};
  double texture_amplitude{0.15};

  void validate() const;
};

ScalarImage generate_phantom(const PhantomSpec& spec, PhantomState state,
                             std::uint64_t seed = 0);

// Desk-scale default: 64x64, 3 mm spacing, centered blob.
PhantomSpec desk_phantom_spec(PhantomKind kind);

}  // namespace dirw
