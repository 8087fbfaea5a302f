#include "dirw/objectives.hpp"

namespace dirw {

SamplePointSet draw_samples(const ScalarImage& image, std::size_t count,
                            std::uint64_t seed) {
  if (count < 1) throw ConfigError("sample count must be >= 1");
  const GridGeometry& g = image.geom;
  SamplePointSet set;
  set.seed = seed;
  set.points.reserve(count);
  Rng rng(seed);
  const Vec3 lo = g.domain_min();
  const Vec3 hi = g.domain_max();
  for (std::size_t n = 0; n < count; ++n) {
    WorldPoint p;
    for (int a = 0; a < g.ndims; ++a) p[a] = rng.uniform(lo[a], hi[a]);
    set.points.push_back(p);
  }
  return set;
}

bool constraint_dominates(const ObjectiveVector& a, bool a_feasible,
                          double a_violation, const ObjectiveVector& b,
                          bool b_feasible, double b_violation) {
  if (a_feasible && !b_feasible) return true;
  if (!a_feasible && b_feasible) return false;
  if (!a_feasible && !b_feasible) return a_violation < b_violation;
  return dominates(a, b);
}

double ssd(const ScalarImage& source, const ScalarImage& target,
           const std::function<WorldPoint(const WorldPoint&)>& transform,
           const SamplePointSet& samples) {
  if (samples.points.empty()) return 0.0;
  double sum = 0.0;
  for (const WorldPoint& p : samples.points) {
    const double diff = interpolate(target, p) - interpolate(source, transform(p));
    sum += diff * diff;
  }
  return sum / static_cast<double>(samples.points.size());
}

const DualMesh& RegistrationProblem::mesh_template() const {
  if (!base_mesh) throw EvalError("mesh template not built for this problem");
  return *base_mesh;
}

void RegistrationProblem::ensure_mesh() {
  if (!base_mesh) base_mesh = build_mesh(target, mesh_config.n_points);
}

Evaluation evaluate(const std::vector<double>& genotype, ModelKind kind,
                    const RegistrationProblem& problem) {
  Evaluation result;
  if (kind == ModelKind::BSpline) {
    BSplineGrid grid = problem.make_grid();
    grid.unpack(genotype);
    double ssd_sum = 0.0, bend_sum = 0.0;
    for (const WorldPoint& p : problem.samples.points) {
      const SplineStencil st = make_stencil(grid, p, true);
      const WorldPoint moved = p + displacement(grid, st);
      const double diff =
          interpolate(problem.target, p) - interpolate(problem.source, moved);
      ssd_sum += diff * diff;
      bend_sum += bending_term(grid, st);
    }
    const double n = static_cast<double>(problem.samples.points.size());
    result.objectives = {ssd_sum / n, bend_sum / n};
  } else if (kind == ModelKind::Mesh) {
    DualMesh mesh = problem.mesh_template();
    mesh.unpack(genotype);
    result.feasible = is_fold_free(mesh);
    if (!result.feasible) {
      result.violation = fold_violation_count(mesh);
      result.objectives = {0.0, 0.0};
      return result;
    }
    const MeshLocator locator(mesh);
    double ssd_sum = 0.0;
    for (const WorldPoint& p : problem.samples.points) {
      const WorldPoint moved =
          apply_location(mesh, locator.locate_or_nearest(p));
      const double diff =
          interpolate(problem.target, p) - interpolate(problem.source, moved);
      ssd_sum += diff * diff;
    }
    const double n = static_cast<double>(problem.samples.points.size());
    result.objectives = {ssd_sum / n, edge_energy(mesh)};
  } else {
    throw EvalError("weight-tuning genotypes are evaluated by the baseline");
  }
  if (!result.objectives.finite())
    throw EvalError("non-finite objective value (model corruption)");
  return result;
}

}  // namespace dirw
