#pragma once

#include "dirw/gomea.hpp"

namespace dirw {

// Objective weights of the single-objective inner registration; normalized
// onto the simplex before each inner run.
struct WeightGenotype {
  double w_sim{0.5};
  double w_mag{0.5};

  // clamps negatives and normalizes to w_sim + w_mag = 1; false when both
  // weights vanish
  bool normalize();
};

struct InnerRunConfig {
  int sample_count{5000};  // fresh minibatch per iteration
  int max_iterations{200};
  double step_a{1.0};      // step length schedule a/(t+A)^alpha, in mm
  double step_A{20.0};
  double step_alpha{0.602};

  void validate() const;
};

// Analytic gradient of w_sim * f_similarity + w_mag * f_bending with respect
// to all grid coefficients, over the given sample batch.
std::vector<double> weighted_gradient(const BSplineGrid& grid,
                                      const RegistrationProblem& problem,
                                      const WeightGenotype& weights,
                                      const std::vector<WorldPoint>& batch);

struct InnerRunResult {
  BSplineGrid grid;
  ObjectiveVector objectives;  // on the problem's full fixed sample set
  bool diverged{false};
};

// Stochastic gradient descent from the identity grid with normalized-
// gradient steps; deterministic given the seed.
InnerRunResult inner_register(const RegistrationProblem& problem,
                              WeightGenotype weights,
                              const InnerRunConfig& config, std::uint64_t seed);

// Black-box weight evaluation task for the outer MO-RV-GOMEA loop: a single
// FOS element holds both weights, each evaluation runs a full inner
// registration.
class WeightTuningTask : public OptimizationTask {
public:
  WeightTuningTask(const RegistrationProblem& problem,
                   const InnerRunConfig& inner, std::uint64_t seed);

  std::size_t variable_count() const override { return 2; }
  std::vector<FosElement> build_fos() const override;
  void init_genotype(Rng& rng, Solution& sol) override;
  void full_evaluate(Solution& sol) override;
  bool try_element(Solution& sol, const FosElement& element,
                   const std::vector<double>& values,
                   ElementBackup& backup) override;
  void revert_element(Solution& sol, const FosElement& element,
                      const ElementBackup& backup) override;
  bool deterministic_evaluation() const override { return false; }

private:
  const RegistrationProblem& problem_;
  InnerRunConfig inner_;
  Rng seed_stream_;
  std::uint64_t eval_counter_{0};
};

// Runs the full baseline: outer MO-RV-GOMEA over the weight pair, inner
// gradient-descent registrations as the black-box evaluation.
RunResult outer_optimize(const RegistrationProblem& problem,
                         const GomeaConfig& gomea_config,
                         const InnerRunConfig& inner_config,
                         std::ostream* log = nullptr);

}  // namespace dirw
