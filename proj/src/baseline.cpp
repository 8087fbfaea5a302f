#include "dirw/baseline.hpp"

#include <algorithm>
#include <cmath>

namespace dirw {

bool WeightGenotype::normalize() {
  w_sim = std::max(w_sim, 0.0);
  w_mag = std::max(w_mag, 0.0);
  const double sum = w_sim + w_mag;
  if (sum <= 0.0) return false;
  w_sim /= sum;
  w_mag /= sum;
  return true;
}

void InnerRunConfig::validate() const {
  if (sample_count < 1) throw ConfigError("inner sample count must be >= 1");
  if (max_iterations < 0) throw ConfigError("inner iteration cap negative");
}

std::vector<double> weighted_gradient(const BSplineGrid& grid,
                                      const RegistrationProblem& problem,
                                      const WeightGenotype& weights,
                                      const std::vector<WorldPoint>& batch) {
  const int d = grid.ndims;
  std::vector<double> grad(grid.variable_count(), 0.0);
  if (batch.empty()) return grad;
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  for (const WorldPoint& p : batch) {
    const SplineStencil st = make_stencil(grid, p, true);
    const WorldPoint moved = p + displacement(grid, st);

    // similarity chain: -2 diff * grad I_s(T'(p)) * basis weight
    const double diff =
        interpolate(problem.target, p) - interpolate(problem.source, moved);
    const Vec3 img_grad = interpolate_gradient(problem.source, moved);

    // bending chain: 2 H[comp][a][b] * d2(basis product)/dx_a dx_b
    double hess[3][3][3] = {};
    const int kmax = d == 3 ? 3 : 0;
    if (weights.w_mag != 0.0) {
      for (int k = 0; k <= kmax; ++k) {
        const int gk = d == 3 ? st.base[2] + k : 0;
        for (int j = 0; j < 4; ++j) {
          const std::size_t row = grid.point_index(st.base[0], st.base[1] + j, gk);
          for (int i = 0; i < 4; ++i) {
            const Vec3& c = grid.coefficients[row + i];
            const double wq[3] = {st.w[0][i], st.w[1][j], d == 3 ? st.w[2][k] : 1.0};
            const double dq[3] = {st.dw[0][i], st.dw[1][j], d == 3 ? st.dw[2][k] : 0.0};
            const double ddq[3] = {st.ddw[0][i], st.ddw[1][j], d == 3 ? st.ddw[2][k] : 0.0};
            for (int a = 0; a < d; ++a)
              for (int b = a; b < d; ++b) {
                double w = 1.0;
                for (int axis = 0; axis < d; ++axis) {
                  if (axis == a && axis == b) w *= ddq[axis];
                  else if (axis == a || axis == b) w *= dq[axis];
                  else w *= wq[axis];
                }
                for (int comp = 0; comp < d; ++comp)
                  hess[comp][a][b] += w * c[comp];
              }
          }
        }
      }
    }

    for (int k = 0; k <= kmax; ++k) {
      const int gk = d == 3 ? st.base[2] + k : 0;
      for (int j = 0; j < 4; ++j) {
        const std::size_t row = grid.point_index(st.base[0], st.base[1] + j, gk);
        for (int i = 0; i < 4; ++i) {
          const std::size_t point = row + i;
          const double wq[3] = {st.w[0][i], st.w[1][j], d == 3 ? st.w[2][k] : 1.0};
          const double dq[3] = {st.dw[0][i], st.dw[1][j], d == 3 ? st.dw[2][k] : 0.0};
          const double ddq[3] = {st.ddw[0][i], st.ddw[1][j], d == 3 ? st.ddw[2][k] : 0.0};

          const double basis = wq[0] * wq[1] * (d == 3 ? wq[2] : 1.0);
          if (weights.w_sim != 0.0) {
            const double f = -2.0 * diff * basis * weights.w_sim * inv_n;
            for (int comp = 0; comp < d; ++comp)
              grad[point * d + comp] += f * img_grad[comp];
          }

          if (weights.w_mag != 0.0) {
            for (int a = 0; a < d; ++a)
              for (int b = a; b < d; ++b) {
                double w = 1.0;
                for (int axis = 0; axis < d; ++axis) {
                  if (axis == a && axis == b) w *= ddq[axis];
                  else if (axis == a || axis == b) w *= dq[axis];
                  else w *= wq[axis];
                }
                const double mult = (a == b ? 2.0 : 4.0) * weights.w_mag * inv_n;
                for (int comp = 0; comp < d; ++comp)
                  grad[point * d + comp] += mult * hess[comp][a][b] * w;
              }
          }
        }
      }
    }
  }
  return grad;
}

InnerRunResult inner_register(const RegistrationProblem& problem,
                              WeightGenotype weights,
                              const InnerRunConfig& config, std::uint64_t seed) {
  config.validate();
  if (!weights.normalize()) throw ConfigError("weights must not both be zero");

  InnerRunResult result;
  result.grid = problem.make_grid();

  Rng rng(seed);
  const GridGeometry& g = problem.target.geom;
  const Vec3 lo = g.domain_min();
  const Vec3 hi = g.domain_max();
  std::vector<WorldPoint> batch(config.sample_count);

  for (int t = 0; t < config.max_iterations; ++t) {
    for (WorldPoint& p : batch)
      for (int a = 0; a < g.ndims; ++a) p[a] = rng.uniform(lo[a], hi[a]);

    const std::vector<double> grad =
        weighted_gradient(result.grid, problem, weights, batch);
    double norm2 = 0.0;
    for (double v : grad) norm2 += v * v;
    if (!std::isfinite(norm2)) {
      result.diverged = true;
      break;
    }
    if (norm2 < 1e-28) break;  // at a stationary point

    const double scale =
        -config.step_a / std::pow(t + config.step_A, config.step_alpha);
    const int d = result.grid.ndims;
    for (std::size_t p = 0; p < result.grid.coefficients.size(); ++p)
      for (int a = 0; a < d; ++a)
        result.grid.coefficients[p][a] += scale * grad[p * d + a];
  }

  for (const Vec3& c : result.grid.coefficients)
    if (!c.finite()) result.diverged = true;

  if (result.diverged) {
    result.objectives = {1e30, 1e30};
    return result;
  }

  double ssd_sum = 0.0, bend_sum = 0.0;
  for (const WorldPoint& p : problem.samples.points) {
    const SplineStencil st = make_stencil(result.grid, p, true);
    const WorldPoint moved = p + displacement(result.grid, st);
    const double diff =
        interpolate(problem.target, p) - interpolate(problem.source, moved);
    ssd_sum += diff * diff;
    bend_sum += bending_term(result.grid, st);
  }
  const double n = static_cast<double>(problem.samples.points.size());
  result.objectives = {ssd_sum / n, bend_sum / n};
  return result;
}

// ---------------------------------------------------------------------------
// WeightTuningTask
// ---------------------------------------------------------------------------

WeightTuningTask::WeightTuningTask(const RegistrationProblem& problem,
                                   const InnerRunConfig& inner,
                                   std::uint64_t seed)
    : problem_(problem), inner_(inner), seed_stream_(seed) {}

std::vector<FosElement> WeightTuningTask::build_fos() const {
  FosElement el;
  el.variables = {0, 1};  // both weights move together
  return {el};
}

void WeightTuningTask::init_genotype(Rng& rng, Solution& sol) {
  sol.genotype = {rng.uniform(), rng.uniform()};
  while (sol.genotype[0] + sol.genotype[1] <= 0.0)
    sol.genotype = {rng.uniform(), rng.uniform()};
}

void WeightTuningTask::full_evaluate(Solution& sol) {
  WeightGenotype weights{sol.genotype[0], sol.genotype[1]};
  if (!weights.normalize()) {
    sol.feasible = false;
    sol.violation = 1.0;
    sol.objectives = {1e30, 1e30};
    return;
  }
  const InnerRunResult inner = inner_register(
      problem_, weights, inner_, seed_stream_.derive(eval_counter_++));
  sol.objectives = inner.objectives;
  sol.feasible = !inner.diverged;
  sol.violation = inner.diverged ? 1.0 : 0.0;
  sol.payload = inner.grid.pack();
}

bool WeightTuningTask::try_element(Solution& sol, const FosElement& element,
                                   const std::vector<double>& values,
                                   ElementBackup& backup) {
  backup.old_values.resize(element.variables.size());
  for (std::size_t v = 0; v < element.variables.size(); ++v)
    backup.old_values[v] = sol.genotype[element.variables[v]];
  backup.old_objectives = sol.objectives;
  backup.old_feasible = sol.feasible;
  backup.old_violation = sol.violation;
  backup.old_payload = sol.payload;

  for (std::size_t v = 0; v < element.variables.size(); ++v)
    sol.genotype[element.variables[v]] = values[v];
  full_evaluate(sol);
  return true;
}

void WeightTuningTask::revert_element(Solution& sol, const FosElement& element,
                                      const ElementBackup& backup) {
  for (std::size_t v = 0; v < element.variables.size(); ++v)
    sol.genotype[element.variables[v]] = backup.old_values[v];
  sol.objectives = backup.old_objectives;
  sol.feasible = backup.old_feasible;
  sol.violation = backup.old_violation;
  sol.payload = backup.old_payload;
}

RunResult outer_optimize(const RegistrationProblem& problem,
                         const GomeaConfig& gomea_config,
                         const InnerRunConfig& inner_config,
                         std::ostream* log) {
  WeightTuningTask task(problem, inner_config, gomea_config.seed ^ 0xba5e11ULL);
  MoGomea optimizer(task, gomea_config);
  return optimizer.run(log);
}

}  // namespace dirw
