#include "dirw/gomea.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dirw/analysis.hpp"

namespace dirw {

namespace {

// O(n^2) constraint-domination ranks: rank 0 = non-dominated
std::vector<int> domination_ranks(const std::vector<Solution>& population,
                                  const std::vector<int>& subset) {
  const int n = static_cast<int>(subset.size());
  std::vector<int> rank(n, -1);
  std::vector<bool> assigned(n, false);
  int remaining = n;
  int current = 0;
  while (remaining > 0) {
    std::vector<int> front;
    for (int i = 0; i < n; ++i) {
      if (assigned[i]) continue;
      const Solution& a = population[subset[i]];
      bool dominated = false;
      for (int j = 0; j < n && !dominated; ++j) {
        if (assigned[j] || j == i) continue;
        const Solution& b = population[subset[j]];
        if (constraint_dominates(b.objectives, b.feasible, b.violation,
                                 a.objectives, a.feasible, a.violation))
          dominated = true;
      }
      if (!dominated) front.push_back(i);
    }
    if (front.empty()) {
      // identical solutions dominate nobody; close the tier
      for (int i = 0; i < n; ++i)
        if (!assigned[i]) front.push_back(i);
    }
    for (int i : front) {
      rank[i] = current;
      assigned[i] = true;
      --remaining;
    }
    ++current;
  }
  return rank;
}

// NSGA-style crowding distance over a member subset
std::vector<double> crowding_distances(const std::vector<Solution>& population,
                                       const std::vector<int>& subset) {
  const int n = static_cast<int>(subset.size());
  std::vector<double> crowd(n, 0.0);
  for (int obj = 0; obj < 2; ++obj) {
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    auto value = [&](int i) {
      const ObjectiveVector& o = population[subset[i]].objectives;
      return obj == 0 ? o.similarity : o.magnitude;
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return value(a) < value(b); });
    const double span = value(order.back()) - value(order.front());
    crowd[order.front()] = std::numeric_limits<double>::infinity();
    crowd[order.back()] = std::numeric_limits<double>::infinity();
    if (span <= 0.0) continue;
    for (int i = 1; i + 1 < n; ++i)
      crowd[order[i]] += (value(order[i + 1]) - value(order[i - 1])) / span;
  }
  return crowd;
}

}  // namespace

std::vector<Cluster> cluster_population(const std::vector<Solution>& population,
                                        int k) {
  const int n = static_cast<int>(population.size());
  if (n < k) throw ConfigError("population smaller than cluster count");

  // normalized objective space
  double lo[2] = {population[0].objectives.similarity,
                  population[0].objectives.magnitude};
  double hi[2] = {lo[0], lo[1]};
  for (const Solution& s : population) {
    lo[0] = std::min(lo[0], s.objectives.similarity);
    hi[0] = std::max(hi[0], s.objectives.similarity);
    lo[1] = std::min(lo[1], s.objectives.magnitude);
    hi[1] = std::max(hi[1], s.objectives.magnitude);
  }
  const double inv0 = hi[0] > lo[0] ? 1.0 / (hi[0] - lo[0]) : 0.0;
  const double inv1 = hi[1] > lo[1] ? 1.0 / (hi[1] - lo[1]) : 0.0;
  auto normalized = [&](int i) {
    return std::array<double, 2>{
        (population[i].objectives.similarity - lo[0]) * inv0,
        (population[i].objectives.magnitude - lo[1]) * inv1};
  };
  auto dist2 = [&](int i, int j) {
    const auto a = normalized(i), b = normalized(j);
    const double dx = a[0] - b[0], dy = a[1] - b[1];
    return dx * dx + dy * dy;
  };

  // leader pool: best domination ranks until at least k candidates
  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  const std::vector<int> ranks = domination_ranks(population, all);
  std::vector<int> pool;
  for (int r = 0; static_cast<int>(pool.size()) < k; ++r) {
    for (int i = 0; i < n; ++i)
      if (ranks[i] == r) pool.push_back(i);
    if (r > n) break;
  }

  // greedy farthest-point leaders, anchored at the best-similarity member
  std::vector<int> leaders;
  int first = pool[0];
  for (int i : pool)
    if (population[i].objectives.similarity <
        population[first].objectives.similarity)
      first = i;
  leaders.push_back(first);
  std::vector<double> min_d(pool.size(), std::numeric_limits<double>::infinity());
  while (static_cast<int>(leaders.size()) < k) {
    int best = -1;
    double best_d = -1.0;
    for (std::size_t c = 0; c < pool.size(); ++c) {
      min_d[c] = std::min(min_d[c], dist2(pool[c], leaders.back()));
      if (min_d[c] > best_d) {
        best_d = min_d[c];
        best = pool[c];
      }
    }
    leaders.push_back(best);
  }

  // balanced nearest assignment: order all (solution, leader) pairs by
  // distance; leaders fill up to their capacity
  std::vector<Cluster> clusters(k);
  std::vector<int> cap(k, n / k);
  for (int c = 0; c < n % k; ++c) cap[c]++;
  struct Pair {
    double d;
    int sol;
    int cluster;
  };
  std::vector<Pair> pairs;
  pairs.reserve(static_cast<std::size_t>(n) * k);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < k; ++c) pairs.push_back({dist2(i, leaders[c]), i, c});
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.d != b.d) return a.d < b.d;
    if (a.sol != b.sol) return a.sol < b.sol;
    return a.cluster < b.cluster;
  });
  std::vector<bool> placed(n, false);
  int placed_count = 0;
  for (const Pair& p : pairs) {
    if (placed_count == n) break;
    if (placed[p.sol]) continue;
    if (static_cast<int>(clusters[p.cluster].members.size()) >= cap[p.cluster])
      continue;
    clusters[p.cluster].members.push_back(p.sol);
    placed[p.sol] = true;
    ++placed_count;
  }

  // two clusters anchor the single-objective extremes
  int best_sim = 0, best_mag = 0;
  for (int i = 1; i < n; ++i) {
    if (population[i].objectives.similarity <
        population[best_sim].objectives.similarity)
      best_sim = i;
    if (population[i].objectives.magnitude <
        population[best_mag].objectives.magnitude)
      best_mag = i;
  }
  auto cluster_of = [&](int sol) {
    for (int c = 0; c < k; ++c)
      for (int m : clusters[c].members)
        if (m == sol) return c;
    return 0;
  };
  const int sim_cluster = cluster_of(best_sim);
  clusters[sim_cluster].edge_similarity = true;
  int mag_cluster = cluster_of(best_mag);
  if (mag_cluster == sim_cluster && k > 1)
    mag_cluster = (sim_cluster + 1) % k;
  clusters[mag_cluster].edge_magnitude = true;

  for (Cluster& c : clusters)
    std::sort(c.members.begin(), c.members.end());
  return clusters;
}

GaussianModel fit_cluster_model(const std::vector<Solution>& population,
                                const std::vector<int>& selection,
                                const FosElement& element, double multiplier) {
  const int d = static_cast<int>(element.variables.size());
  GaussianModel model;
  model.mean.assign(d, 0.0);
  const int s = static_cast<int>(selection.size());
  for (int m : selection)
    for (int v = 0; v < d; ++v)
      model.mean[v] += population[m].genotype[element.variables[v]];
  for (int v = 0; v < d; ++v) model.mean[v] /= s;

  std::vector<double> cov(static_cast<std::size_t>(d) * d, 0.0);
  for (int m : selection)
    for (int a = 0; a < d; ++a) {
      const double da =
          population[m].genotype[element.variables[a]] - model.mean[a];
      for (int b = 0; b <= a; ++b) {
        const double db =
            population[m].genotype[element.variables[b]] - model.mean[b];
        cov[a * d + b] += da * db;
      }
    }
  const double denom = std::max(1, s - 1);
  double trace = 0.0;
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b <= a; ++b) cov[a * d + b] /= denom;
    trace += cov[a * d + a];
  }
  if (trace <= 0.0) return model;  // zero model: samples collapse to the mean

  for (int a = 0; a < d; ++a) cov[a * d + a] += 1e-10 * trace;
  for (auto& c : cov) c *= multiplier;

  // Cholesky; on failure fall back to the diagonal
  std::vector<double> chol(static_cast<std::size_t>(d) * d, 0.0);
  bool ok = true;
  for (int a = 0; a < d && ok; ++a) {
    for (int b = 0; b <= a; ++b) {
      double sum = cov[a * d + b];
      for (int q = 0; q < b; ++q) sum -= chol[a * d + q] * chol[b * d + q];
      if (a == b) {
        if (sum <= 0.0) {
          ok = false;
          break;
        }
        chol[a * d + a] = std::sqrt(sum);
      } else {
        chol[a * d + b] = sum / chol[b * d + b];
      }
    }
  }
  if (!ok) {
    std::fill(chol.begin(), chol.end(), 0.0);
    for (int a = 0; a < d; ++a)
      chol[a * d + a] = std::sqrt(std::max(cov[a * d + a], 0.0));
  }
  model.chol = std::move(chol);
  return model;
}

// ---------------------------------------------------------------------------
// MoGomea
// ---------------------------------------------------------------------------

MoGomea::MoGomea(OptimizationTask& task, const GomeaConfig& config)
    : task_(task),
      config_(config),
      rng_(config.seed),
      archive_(config.archive_capacity) {
  if (config_.population_size < config_.n_clusters)
    throw ConfigError("population must be at least the cluster count");
  fos_ = task_.build_fos();
  cluster_multipliers_.assign(config_.n_clusters, 1.0);
}

void MoGomea::initialize_population() {
  population_.resize(config_.population_size);
  const std::vector<double> reference = task_.reference_genotype();
  for (std::size_t i = 0; i < population_.size(); ++i) {
    Solution& sol = population_[i];
    task_.init_genotype(rng_, sol);
    if (i == 0 && !reference.empty()) sol.genotype = reference;
    task_.full_evaluate(sol);
    if (sol.feasible)
      archive_.insert(sol.objectives, sol.genotype, sol.payload);
  }
  // fixed hypervolume reference from the initial population
  double max_sim = 0.0, max_mag = 0.0;
  for (const Solution& sol : population_) {
    if (!sol.feasible) continue;
    max_sim = std::max(max_sim, sol.objectives.similarity);
    max_mag = std::max(max_mag, sol.objectives.magnitude);
  }
  reference_ = {std::max(1e-12, 1.1 * max_sim), std::max(1e-12, 1.1 * max_mag)};
}

bool MoGomea::cache_consistent(const Solution& sol) {
  Solution scratch;
  scratch.genotype = sol.genotype;
  scratch.payload = sol.payload;
  task_.full_evaluate(scratch);
  const double tol = config_.cache_check_tolerance;
  const auto rel = [](double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-12});
    return std::abs(a - b) / scale;
  };
  return sol.feasible == scratch.feasible &&
         rel(sol.objectives.similarity, scratch.objectives.similarity) < tol &&
         rel(sol.objectives.magnitude, scratch.objectives.magnitude) < tol;
}

MoGomea::GomOutcome MoGomea::gom_step(int solution_index, Cluster& cluster) {
  GomOutcome outcome;
  Solution& sol = population_[solution_index];

  std::vector<int> order(fos_.size());
  for (std::size_t e = 0; e < fos_.size(); ++e) order[e] = static_cast<int>(e);
  for (std::size_t e = order.size(); e > 1; --e)
    std::swap(order[e - 1], order[rng_.uniform_index(e)]);

  bool any_accept = false;
  std::vector<double> values;
  ElementBackup backup;
  for (int ei : order) {
    const FosElement& element = fos_[ei];
    const GaussianModel& model = cluster.models[ei];
    const int d = static_cast<int>(element.variables.size());
    values.assign(model.mean.begin(), model.mean.end());
    if (!model.chol.empty()) {
      std::vector<double> z(d);
      for (int v = 0; v < d; ++v) z[v] = rng_.normal();
      for (int a = 0; a < d; ++a) {
        double acc = 0.0;
        for (int b = 0; b <= a; ++b) acc += model.chol[a * d + b] * z[b];
        values[a] += acc;
      }
    }

    ++outcome.attempts;
    const ObjectiveVector old_obj = sol.objectives;
    const bool old_feasible = sol.feasible;
    const double old_violation = sol.violation;
    if (!task_.try_element(sol, element, values, backup)) continue;

    bool accept = false;
    if (sol.feasible &&
        archive_.insert(sol.objectives, sol.genotype, sol.payload))
      accept = true;
    else if (constraint_dominates(sol.objectives, sol.feasible, sol.violation,
                                  old_obj, old_feasible, old_violation))
      accept = true;
    else if (cluster.edge_similarity && sol.feasible && old_feasible &&
             sol.objectives.similarity < old_obj.similarity)
      accept = true;
    else if (cluster.edge_magnitude && sol.feasible && old_feasible &&
             sol.objectives.magnitude < old_obj.magnitude)
      accept = true;

    if (accept) {
      any_accept = true;
      ++outcome.accepts;
    } else {
      task_.revert_element(sol, element, backup);
    }
  }

  if (!any_accept) forced_improvement(sol);
  return outcome;
}

bool MoGomea::forced_improvement(Solution& sol) {
  if (archive_.size() == 0) return false;
  // copy: archive insertions below may reallocate the entry storage
  const std::vector<double> elite_genotype =
      archive_.entries()[rng_.uniform_index(archive_.size())].genotype;

  std::vector<int> order(fos_.size());
  for (std::size_t e = 0; e < fos_.size(); ++e) order[e] = static_cast<int>(e);
  for (std::size_t e = order.size(); e > 1; --e)
    std::swap(order[e - 1], order[rng_.uniform_index(e)]);

  std::vector<double> values;
  ElementBackup backup;
  for (int ei : order) {
    const FosElement& element = fos_[ei];
    values.resize(element.variables.size());
    for (std::size_t v = 0; v < element.variables.size(); ++v)
      values[v] = elite_genotype[element.variables[v]];

    const ObjectiveVector old_obj = sol.objectives;
    const bool old_feasible = sol.feasible;
    const double old_violation = sol.violation;
    if (!task_.try_element(sol, element, values, backup)) continue;

    bool accept = false;
    if (sol.feasible &&
        archive_.insert(sol.objectives, sol.genotype, sol.payload))
      accept = true;
    else if (constraint_dominates(sol.objectives, sol.feasible, sol.violation,
                                  old_obj, old_feasible, old_violation))
      accept = true;

    if (accept) return true;
    task_.revert_element(sol, element, backup);
  }
  return false;
}

void MoGomea::prepare_generation() {
  clusters_ = cluster_population(population_, config_.n_clusters);

  for (std::size_t c = 0; c < clusters_.size(); ++c) {
    Cluster& cluster = clusters_[c];
    cluster.multiplier = cluster_multipliers_[c];

    // selection: top fraction by in-cluster domination rank, then crowding
    const std::vector<int> ranks = domination_ranks(population_, cluster.members);
    const std::vector<double> crowd =
        crowding_distances(population_, cluster.members);
    std::vector<int> order(cluster.members.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      if (ranks[a] != ranks[b]) return ranks[a] < ranks[b];
      return crowd[a] > crowd[b];
    });
    const int take = static_cast<int>(
        std::ceil(config_.selection_fraction * cluster.members.size()));
    std::vector<int> selection;
    selection.reserve(take);
    for (int i = 0; i < take; ++i)
      selection.push_back(cluster.members[order[i]]);

    cluster.models.resize(fos_.size());
    for (std::size_t e = 0; e < fos_.size(); ++e)
      cluster.models[e] = fit_cluster_model(population_, selection, fos_[e],
                                            cluster.multiplier);
  }
}

RunResult MoGomea::run(std::ostream* log) {
  initialize_population();

  RunResult result;
  const auto record = [&](int gen, const std::vector<double>& acc_rates) {
    GenerationRecord rec;
    rec.generation = gen;
    std::vector<ObjectiveVector> front;
    front.reserve(archive_.size());
    for (const auto& e : archive_.entries()) front.push_back(e.objectives);
    rec.hypervolume = hypervolume_2d(front, reference_);
    rec.archive_size = archive_.size();
    double best_sim = std::numeric_limits<double>::infinity();
    double best_mag = std::numeric_limits<double>::infinity();
    for (const auto& e : archive_.entries()) {
      best_sim = std::min(best_sim, e.objectives.similarity);
      best_mag = std::min(best_mag, e.objectives.magnitude);
    }
    rec.best_similarity = best_sim;
    rec.best_magnitude = best_mag;
    rec.cluster_acceptance = acc_rates;
    result.history.push_back(rec);
    if (log) {
      *log << "{\"generation\":" << rec.generation
           << ",\"hypervolume\":" << rec.hypervolume
           << ",\"archive_size\":" << rec.archive_size
           << ",\"best_similarity\":" << rec.best_similarity
           << ",\"best_magnitude\":" << rec.best_magnitude
           << ",\"cluster_acceptance\":[";
      for (std::size_t c = 0; c < acc_rates.size(); ++c)
        *log << (c ? "," : "") << acc_rates[c];
      *log << "]}\n";
    }
  };

  record(0, {});

  for (int gen = 1; gen <= config_.generations; ++gen) {
    prepare_generation();

    std::vector<int> attempts(clusters_.size(), 0);
    std::vector<int> accepts(clusters_.size(), 0);
    std::vector<int> membership(population_.size(), 0);
    for (std::size_t c = 0; c < clusters_.size(); ++c)
      for (int m : clusters_[c].members) membership[m] = static_cast<int>(c);

    for (std::size_t i = 0; i < population_.size(); ++i) {
      const int c = membership[i];
      const GomOutcome out = gom_step(static_cast<int>(i), clusters_[c]);
      attempts[c] += out.attempts;
      accepts[c] += out.accepts;
    }

    std::vector<double> rates(clusters_.size(), 0.0);
    for (std::size_t c = 0; c < clusters_.size(); ++c) {
      rates[c] = attempts[c] > 0
                     ? static_cast<double>(accepts[c]) / attempts[c]
                     : 0.0;
      double& mult = cluster_multipliers_[c];
      mult *= rates[c] > 0.2 ? 1.1 : 0.9;
      mult = std::clamp(mult, 1e-4, 10.0);
    }

    if (config_.archive_invariant_checks) {
      const auto& entries = archive_.entries();
      for (std::size_t a = 0; a < entries.size(); ++a)
        for (std::size_t b = 0; b < entries.size(); ++b)
          if (a != b &&
              dominates(entries[a].objectives, entries[b].objectives))
            throw EvalError("archive holds a dominated pair");
    }
    if (gen % 10 == 0 && task_.deterministic_evaluation()) {
      for (Solution& sol : population_) {
        if (!cache_consistent(sol)) {
          if (log)
            *log << "{\"warning\":\"cache divergence, full re-evaluation\","
                 << "\"generation\":" << gen << "}\n";
          task_.full_evaluate(sol);
        }
      }
    }

    record(gen, rates);
  }

  result.archive = archive_.entries();
  result.reference_point = reference_;
  return result;
}

}  // namespace dirw
