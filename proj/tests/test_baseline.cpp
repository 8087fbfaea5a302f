#include <doctest.h>

#include "dirw/baseline.hpp"
#include "dirw/runner.hpp"

using namespace dirw;

namespace {

RegistrationProblem small_problem(std::size_t samples = 300,
                                  std::array<int, 3> grid = {5, 5, 1}) {
  RunConfig cfg = RunConfig::desk_preset("bspline-baseline", "isolated-blob");
  cfg.sample_count = static_cast<long long>(samples);
  cfg.grid_points = grid;
  return build_problem(cfg, 11);
}

// direct batch objective for the finite-difference oracle
double batch_objective(const BSplineGrid& grid, const RegistrationProblem& prob,
                       const WeightGenotype& w,
                       const std::vector<WorldPoint>& batch) {
  double ssd_sum = 0.0, bend_sum = 0.0;
  for (const WorldPoint& p : batch) {
    const SplineStencil st = make_stencil(grid, p, true);
    const double diff = interpolate(prob.target, p) -
                        interpolate(prob.source, p + displacement(grid, st));
    ssd_sum += diff * diff;
    bend_sum += bending_term(grid, st);
  }
  const double n = static_cast<double>(batch.size());
  return w.w_sim * ssd_sum / n + w.w_mag * bend_sum / n;
}

}  // namespace

TEST_CASE("weight normalization clamps and projects onto the simplex") {
  WeightGenotype w{2.0, 6.0};
  CHECK(w.normalize());
  CHECK(w.w_sim == doctest::Approx(0.25));
  CHECK(w.w_mag == doctest::Approx(0.75));
  WeightGenotype neg{-1.0, 0.5};
  CHECK(neg.normalize());
  CHECK(neg.w_sim == 0.0);
  CHECK(neg.w_mag == 1.0);
  WeightGenotype zero{0.0, 0.0};
  CHECK_FALSE(zero.normalize());
}

TEST_CASE("identity grid on identical images has a zero gradient") {
  RegistrationProblem prob = small_problem();
  prob.source = prob.target;
  const BSplineGrid grid = prob.make_grid();
  const WeightGenotype w{1.0, 0.0};
  const auto grad = weighted_gradient(grid, prob, w, prob.samples.points);
  for (double g : grad) CHECK(g == 0.0);
}

TEST_CASE("affine coefficients with zero similarity weight give a zero gradient") {
  RegistrationProblem prob = small_problem();
  BSplineGrid grid = prob.make_grid();
  for (int j = 0; j < grid.control_dims[1]; ++j)
    for (int i = 0; i < grid.control_dims[0]; ++i) {
      const WorldPoint x = grid.point_position(i, j);
      grid.coefficients[grid.point_index(i, j)] = {0.1 * x.x - 0.05 * x.y + 2.0,
                                                   0.2 * x.y + 1.0, 0.0};
    }
  const WeightGenotype w{0.0, 1.0};
  const auto grad = weighted_gradient(grid, prob, w, prob.samples.points);
  for (double g : grad) CHECK(std::abs(g) < 1e-9);
}

TEST_CASE("analytic gradient matches central finite differences") {
  RegistrationProblem prob = small_problem(200);
  Rng rng(21);
  for (int rep = 0; rep < 3; ++rep) {
    BSplineGrid grid = prob.make_grid();
    for (Vec3& c : grid.coefficients)
      for (int a = 0; a < 2; ++a) c[a] = rng.uniform(-6.0, 6.0);
    WeightGenotype w{rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0)};
    w.normalize();
    std::vector<WorldPoint> batch;
    for (int n = 0; n < 60; ++n)
      batch.push_back({rng.uniform(1.0, 188.0), rng.uniform(1.0, 188.0)});

    const auto grad = weighted_gradient(grid, prob, w, batch);
    double max_abs = 0.0;
    for (double g : grad) max_abs = std::max(max_abs, std::abs(g));

    const double h = 1e-4;
    const int d = grid.ndims;
    for (std::size_t v = 0; v < grad.size(); v += 7) {
      BSplineGrid plus = grid, minus = grid;
      plus.coefficients[v / d][v % d] += h;
      minus.coefficients[v / d][v % d] -= h;
      const double fd = (batch_objective(plus, prob, w, batch) -
                         batch_objective(minus, prob, w, batch)) /
                        (2.0 * h);
      CHECK(std::abs(grad[v] - fd) <=
            1e-4 * std::max({std::abs(grad[v]), std::abs(fd), 1e-3 * max_abs}));
    }
  }
}

TEST_CASE("zero-iteration inner runs return the identity objectives exactly") {
  RegistrationProblem prob = small_problem();
  InnerRunConfig cfg;
  cfg.sample_count = 100;
  cfg.max_iterations = 0;
  const InnerRunResult r = inner_register(prob, {0.5, 0.5}, cfg, 1);
  const Evaluation identity = evaluate(
      std::vector<double>(prob.make_grid().variable_count(), 0.0),
      ModelKind::BSpline, prob);
  CHECK(r.objectives.similarity == identity.objectives.similarity);
  CHECK(r.objectives.magnitude == identity.objectives.magnitude);
}

TEST_CASE("descent on identical images never worsens similarity") {
  RegistrationProblem prob = small_problem();
  prob.source = prob.target;
  InnerRunConfig cfg;
  cfg.sample_count = 200;
  cfg.max_iterations = 30;
  const InnerRunResult r = inner_register(prob, {0.9, 0.1}, cfg, 5);
  CHECK_FALSE(r.diverged);
  CHECK(r.objectives.similarity <= 1e-12);  // started at the minimum
}

TEST_CASE("inner runs are deterministic by seed") {
  RegistrationProblem prob = small_problem();
  InnerRunConfig cfg;
  cfg.sample_count = 150;
  cfg.max_iterations = 20;
  cfg.step_a = 5000.0;
  const InnerRunResult a = inner_register(prob, {0.7, 0.3}, cfg, 77);
  const InnerRunResult b = inner_register(prob, {0.7, 0.3}, cfg, 77);
  CHECK(a.grid.pack() == b.grid.pack());
  const InnerRunResult c = inner_register(prob, {0.7, 0.3}, cfg, 78);
  CHECK(a.grid.pack() != c.grid.pack());
}

TEST_CASE("a magnitude-dominated inner run stays near the identity") {
  RegistrationProblem prob = small_problem();
  InnerRunConfig cfg;
  cfg.sample_count = 300;
  cfg.max_iterations = 60;
  cfg.step_a = 10000.0;
  const InnerRunResult r = inner_register(prob, {0.001, 0.999}, cfg, 3);
  CHECK_FALSE(r.diverged);

  // bending stays below a jittered-identity baseline
  Rng rng(31);
  BSplineGrid jittered = prob.make_grid();
  for (Vec3& c : jittered.coefficients)
    for (int a = 0; a < 2; ++a) c[a] = rng.uniform(-3.0, 3.0);
  std::vector<WorldPoint> samples = prob.samples.points;
  CHECK(r.objectives.magnitude < bending_energy(jittered, samples));
  double max_coeff = 0.0;
  for (const Vec3& c : r.grid.coefficients)
    max_coeff = std::max(max_coeff, std::max(std::abs(c.x), std::abs(c.y)));
  CHECK(max_coeff < 5.0);  // near identity at a 189 mm image extent
}

TEST_CASE("outer optimization with zero generations archives the initial front") {
  RunConfig cfg = RunConfig::desk_preset("bspline-baseline", "isolated-blob");
  cfg.sample_count = 300;
  cfg.inner.sample_count = 200;
  cfg.inner.max_iterations = 15;
  RegistrationProblem prob = build_problem(cfg, 13);

  GomeaConfig gc;
  gc.population_size = 4;
  gc.generations = 0;
  gc.n_clusters = 2;
  gc.archive_capacity = 50;
  gc.seed = 21;
  const RunResult result = outer_optimize(prob, gc, cfg.inner);
  CHECK(result.archive.size() >= 1);
  CHECK(result.archive.size() <= 4);
  for (const auto& a : result.archive) {
    CHECK(a.objectives.finite());
    CHECK(a.payload.size() == prob.make_grid().variable_count());
    for (const auto& b : result.archive)
      if (&a != &b) CHECK_FALSE(dominates(a.objectives, b.objectives));
  }
}
