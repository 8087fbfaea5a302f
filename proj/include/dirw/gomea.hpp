#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <vector>

#include "dirw/archive.hpp"
#include "dirw/objectives.hpp"

namespace dirw {

// One linkage set: the variables mutated together, plus the model region
// whose objective contributions they touch.
struct FosElement {
  std::vector<int> variables;
  PatchRegion region;                      // B-spline handle
  std::vector<int> simplex_set;            // mesh handle: star of the points
  std::array<int, 2> mesh_points{-1, -1};  // mesh handle: moved points
};

struct Solution {
  std::vector<double> genotype;
  ObjectiveVector objectives;
  bool feasible{true};
  double violation{0.0};

  // cached partial-evaluation state
  double ssd_sum{0.0};
  double mag_sum{0.0};
  std::optional<BSplineGrid> grid_state;
  std::optional<DualMesh> mesh_state;
  std::vector<int> sample_simplex;  // mesh: sample -> assigned simplex
  std::vector<double> payload;      // baseline: registered grid coefficients
};

// Undo record for one attempted element change.
struct ElementBackup {
  std::vector<double> old_values;
  ObjectiveVector old_objectives;
  bool old_feasible{true};
  double old_violation{0.0};
  double old_ssd_sum{0.0};
  double old_mag_sum{0.0};
  std::vector<std::pair<int, int>> old_assignments;  // mesh: (sample, simplex)
  std::vector<double> old_payload;
};

// A model bound to a registration problem, exposing genotype initialization,
// full evaluation, and incremental element moves for the optimizer.
class OptimizationTask {
public:
  virtual ~OptimizationTask() = default;

  virtual std::size_t variable_count() const = 0;
  virtual std::vector<FosElement> build_fos() const = 0;
  virtual void init_genotype(Rng& rng, Solution& sol) = 0;
  virtual void full_evaluate(Solution& sol) = 0;

  // Applies new values to one element with incremental re-evaluation.
  // Returns false when the change is rejected outright (mesh fold); the
  // solution is then unchanged. On success the backup allows revert.
  virtual bool try_element(Solution& sol, const FosElement& element,
                           const std::vector<double>& values,
                           ElementBackup& backup) = 0;
  virtual void revert_element(Solution& sol, const FosElement& element,
                              const ElementBackup& backup) = 0;

  // stochastic black-box tasks cannot be re-evaluated for cache comparison
  virtual bool deterministic_evaluation() const { return true; }

  // natural do-nothing genotype seeded as the first population member
  // (identity transform); empty when the task has none
  virtual std::vector<double> reference_genotype() const { return {}; }
};

struct GomeaConfig {
  int population_size{50};
  int generations{100};
  int n_clusters{10};
  double selection_fraction{0.35};
  std::size_t archive_capacity{150};
  std::uint64_t seed{1};
  double cache_check_tolerance{1e-6};  // divergence triggers full re-eval
  // test mode: exhaustively verify archive invariants every generation
  bool archive_invariant_checks{false};
};

struct GenerationRecord {
  int generation{0};
  double hypervolume{0.0};
  std::size_t archive_size{0};
  double best_similarity{0.0};
  double best_magnitude{0.0};
  std::vector<double> cluster_acceptance;
};

struct RunResult {
  std::vector<ElitistArchive::Entry> archive;
  std::vector<GenerationRecord> history;
  ObjectiveVector reference_point;  // fixed at generation 0
};

// Gaussian model over one FOS element's variables, fit per cluster.
struct GaussianModel {
  std::vector<double> mean;
  std::vector<double> chol;  // lower-triangular, row-major; empty when zero
};

struct Cluster {
  std::vector<int> members;
  bool edge_similarity{false};
  bool edge_magnitude{false};
  double multiplier{1.0};
  std::vector<GaussianModel> models;  // parallel to the FOS
};

// Balanced leader-based clustering in normalized objective space. Leaders
// are spread greedily over the best-ranked solutions; membership sizes stay
// within +-1; two clusters anchor the single-objective extremes.
std::vector<Cluster> cluster_population(const std::vector<Solution>& population,
                                        int k);

// Mean and (regularized, multiplier-scaled) covariance of the element
// variables over the selected top fraction of cluster members.
GaussianModel fit_cluster_model(const std::vector<Solution>& population,
                                const std::vector<int>& selection,
                                const FosElement& element, double multiplier);

class MoGomea {
public:
  MoGomea(OptimizationTask& task, const GomeaConfig& config);

  RunResult run(std::ostream* log = nullptr);

private:
  struct GomOutcome {
    int attempts{0};
    int accepts{0};
  };

  void initialize_population();
  void prepare_generation();
  GomOutcome gom_step(int solution_index, Cluster& cluster);
  bool forced_improvement(Solution& sol);
  bool cache_consistent(const Solution& sol);
  ObjectiveVector current_reference() const { return reference_; }

  OptimizationTask& task_;
  GomeaConfig config_;
  Rng rng_;
  std::vector<FosElement> fos_;
  std::vector<Solution> population_;
  std::vector<Cluster> clusters_;
  ElitistArchive archive_;
  ObjectiveVector reference_{1.0, 1.0};
  std::vector<double> cluster_multipliers_;
};

}  // namespace dirw
