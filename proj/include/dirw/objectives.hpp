#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dirw/bspline.hpp"
#include "dirw/image.hpp"
#include "dirw/mesh.hpp"

namespace dirw {

// Random sample positions over the continuous target image domain, drawn
// once per run and reused by every evaluation.
struct SamplePointSet {
  std::vector<WorldPoint> points;
  std::uint64_t seed{0};
};

// default count = number of voxels in the target image
SamplePointSet draw_samples(const ScalarImage& image, std::size_t count,
                            std::uint64_t seed);

// Both objectives are minimized. similarity in intensity^2, magnitude in
// model-specific units.
struct ObjectiveVector {
  double similarity{0.0};
  double magnitude{0.0};

  bool finite() const {
    return std::isfinite(similarity) && std::isfinite(magnitude);
  }
};

// strict Pareto dominance, minimization
inline bool dominates(const ObjectiveVector& a, const ObjectiveVector& b) {
  return a.similarity <= b.similarity && a.magnitude <= b.magnitude &&
         (a.similarity < b.similarity || a.magnitude < b.magnitude);
}

// feasible solutions outrank infeasible ones; infeasible compare by violation
bool constraint_dominates(const ObjectiveVector& a, bool a_feasible,
                          double a_violation, const ObjectiveVector& b,
                          bool b_feasible, double b_violation);

// Mean squared intensity difference over the sample set, both images
// interpolated.
double ssd(const ScalarImage& source, const ScalarImage& target,
           const std::function<WorldPoint(const WorldPoint&)>& transform,
           const SamplePointSet& samples);

enum class ModelKind { BSpline, Mesh, WeightTuning };

struct BSplineModelConfig {
  std::array<int, 3> control_points{7, 7, 1};
};

struct MeshModelConfig {
  int n_points{40};
};

// A registration problem instance shared by all approaches: the image pair,
// the fixed sample set, and the model templates genotypes decode into.
struct RegistrationProblem {
  ScalarImage source;
  ScalarImage target;
  SamplePointSet samples;
  BSplineModelConfig bspline_config;
  MeshModelConfig mesh_config;
  std::optional<DualMesh> base_mesh;  // built lazily for mesh runs

  BSplineGrid make_grid() const {
    return BSplineGrid::for_image(target.geom, bspline_config.control_points);
  }
  const DualMesh& mesh_template() const;
  void ensure_mesh();
};

struct Evaluation {
  ObjectiveVector objectives;
  bool feasible{true};
  double violation{0.0};
};

// Scratch evaluation of a genotype: (ssd, bending) for B-spline solutions,
// (ssd, edge energy) for mesh solutions; mesh fold violations mark the
// solution infeasible with the violating simplex count.
Evaluation evaluate(const std::vector<double>& genotype, ModelKind kind,
                    const RegistrationProblem& problem);

}  // namespace dirw
