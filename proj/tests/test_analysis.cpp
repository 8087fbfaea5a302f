#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dirw/analysis.hpp"
#include "dirw/runner.hpp"
#include "dirw/tasks.hpp"

using namespace dirw;

namespace {

DeformationField constant_field(int nx, int ny, const Vec3& v) {
  DeformationField dvf;
  dvf.geom.ndims = 2;
  dvf.geom.dims = {nx, ny, 1};
  dvf.geom.spacing = {1.0, 1.0, 1.0};
  dvf.vectors.assign(static_cast<std::size_t>(nx) * ny, v);
  return dvf;
}

ApproximationSet set_with(const std::vector<ObjectiveVector>& reevals) {
  ApproximationSet set;
  set.approach = "test";
  for (const auto& o : reevals) {
    ReevaluatedSolution sol;
    sol.reevaluated = o;
    sol.original = o;
    set.solutions.push_back(sol);
  }
  return set;
}

}  // namespace

TEST_CASE("common deformation magnitude of a uniform field is zero") {
  const DeformationField dvf = constant_field(8, 8, {4.0, -1.0, 0.0});
  CHECK(common_def_magnitude(dvf) == 0.0);
}

TEST_CASE("worked 2x2 alternating-column field gives 2") {
  DeformationField dvf = constant_field(2, 2, {0.0, 0.0, 0.0});
  dvf.at(1, 0) = {1.0, 0.0, 0.0};
  dvf.at(1, 1) = {1.0, 0.0, 0.0};
  CHECK(common_def_magnitude(dvf) == doctest::Approx(2.0));
}

TEST_CASE("common deformation magnitude matches a brute-force double loop") {
  Rng rng(3);
  DeformationField dvf = constant_field(9, 7, {});
  for (Vec3& v : dvf.vectors) v = {rng.uniform(-2, 2), rng.uniform(-2, 2), 0.0};
  double oracle = 0.0;
  for (int j = 0; j < 7; ++j)
    for (int i = 0; i < 9; ++i) {
      double sum = 0.0;
      int n = 0;
      for (const auto& [di, dj] :
           std::vector<std::pair<int, int>>{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
        const int ii = i + di, jj = j + dj;
        if (ii < 0 || jj < 0 || ii >= 9 || jj >= 7) continue;
        sum += (dvf.at(i, j) - dvf.at(ii, jj)).norm2();
        ++n;
      }
      oracle += sum / n;
    }
  CHECK(common_def_magnitude(dvf) == doctest::Approx(oracle).epsilon(1e-13));
}

TEST_CASE("common deformation magnitude is translation invariant") {
  Rng rng(5);
  DeformationField dvf = constant_field(6, 6, {});
  for (Vec3& v : dvf.vectors) v = {rng.uniform(-2, 2), rng.uniform(-2, 2), 0.0};
  const double before = common_def_magnitude(dvf);
  for (Vec3& v : dvf.vectors) v += Vec3{10.0, -3.0, 0.0};
  CHECK(common_def_magnitude(dvf) == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("a single-member set is non-dominated") {
  ApproximationSet set = set_with({{1.0, 1.0}});
  refresh_dominated_flags(set);
  CHECK_FALSE(set.solutions[0].dominated);
}

TEST_CASE("worked dominance flags for {(1,2),(2,1),(2,2)}") {
  ApproximationSet set = set_with({{1.0, 2.0}, {2.0, 1.0}, {2.0, 2.0}});
  refresh_dominated_flags(set);
  CHECK_FALSE(set.solutions[0].dominated);
  CHECK_FALSE(set.solutions[1].dominated);
  CHECK(set.solutions[2].dominated);
}

TEST_CASE("no two flagged-non-dominated members dominate each other") {
  Rng rng(29);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<ObjectiveVector> objs;
    const int n = 2 + static_cast<int>(rng.uniform_index(30));
    for (int i = 0; i < n; ++i) objs.push_back({rng.uniform(), rng.uniform()});
    ApproximationSet set = set_with(objs);
    refresh_dominated_flags(set);
    for (const auto& a : set.solutions)
      for (const auto& b : set.solutions) {
        if (&a == &b || a.dominated || b.dominated) continue;
        CHECK_FALSE(dominates(a.reevaluated, b.reevaluated));
      }
  }
}

TEST_CASE("mesh re-evaluation keeps the similarity metric unchanged") {
  RunConfig cfg = RunConfig::desk_preset("mesh-mo", "isolated-blob");
  cfg.sample_count = 500;
  RegistrationProblem prob = build_problem(cfg, 17);
  prob.ensure_mesh();
  MeshTask task(prob);
  Rng rng(7);

  ApproximationSet set;
  set.approach = "mesh-mo";
  set.kind = ModelKind::Mesh;
  for (int n = 0; n < 5; ++n) {
    Solution sol;
    task.init_genotype(rng, sol);
    task.full_evaluate(sol);
    ReevaluatedSolution rs;
    rs.genotype = sol.genotype;
    rs.original = sol.objectives;
    set.solutions.push_back(rs);
  }
  // the common pipeline reuses the run's own samples here
  reevaluate_set(set, prob, prob.samples);
  for (const auto& sol : set.solutions) {
    CHECK(sol.valid);
    CHECK(std::abs(sol.reevaluated.similarity - sol.original.similarity) < 1e-6);
  }
}

TEST_CASE("hypervolume of the worked front {(1,3),(2,2),(3,1)} is 6") {
  const std::vector<ObjectiveVector> front{{1, 3}, {2, 2}, {3, 1}};
  CHECK(hypervolume_2d(front, {4, 4}) == doctest::Approx(6.0));
}

TEST_CASE("hypervolume of a single point") {
  CHECK(hypervolume_2d({{1, 1}}, {2, 2}) == doctest::Approx(1.0));
}

TEST_CASE("hypervolume of an empty front is zero") {
  CHECK(hypervolume_2d({}, {2, 2}) == 0.0);
}

TEST_CASE("points beyond the reference contribute zero") {
  CHECK(hypervolume_2d({{1, 1}, {5, 0.5}}, {2, 2}) == doctest::Approx(1.0));
}

TEST_CASE("adding a non-dominated point never decreases hypervolume") {
  Rng rng(11);
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<ObjectiveVector> front;
    const int n = 2 + static_cast<int>(rng.uniform_index(20));
    for (int i = 0; i < n; ++i)
      front.push_back({rng.uniform(), rng.uniform()});
    const ObjectiveVector ref{1.5, 1.5};
    const double before = hypervolume_2d(front, ref);
    front.push_back({rng.uniform(), rng.uniform()});
    const double after = hypervolume_2d(front, ref);
    CHECK(after >= before - 1e-12);
  }
}

TEST_CASE("hypervolume agrees with Monte-Carlo box integration") {
  Rng rng(13);
  for (int rep = 0; rep < 3; ++rep) {
    std::vector<ObjectiveVector> front;
    for (int i = 0; i < 30; ++i) front.push_back({rng.uniform(), rng.uniform()});
    const ObjectiveVector ref{1.0, 1.0};
    const double exact = hypervolume_2d(front, ref);

    const int n_mc = 200000;
    int hits = 0;
    for (int m = 0; m < n_mc; ++m) {
      const double x = rng.uniform(), y = rng.uniform();
      for (const auto& p : front)
        if (p.similarity <= x && p.magnitude <= y) {
          ++hits;
          break;
        }
    }
    const double estimate = static_cast<double>(hits) / n_mc;
    const double sigma = std::sqrt(estimate * (1.0 - estimate) / n_mc);
    CHECK(std::abs(exact - estimate) <= 3.0 * sigma + 1e-9);
  }
}

TEST_CASE("median selection follows the lower-median and tie rules") {
  CHECK(select_median_run({3.0, 1.0, 2.0}) == 2);
  CHECK(select_median_run({1.0, 2.0, 3.0, 4.0}) == 1);
  CHECK(select_median_run(std::vector<double>(10, 5.0)) == 0);
}

TEST_CASE("highlight selection: exact 45-degree member wins") {
  ApproximationSet set = set_with({{0.0, 1.0}, {0.5, 0.5}, {1.0, 0.0}});
  refresh_dominated_flags(set);
  const HighlightTriple t = select_highlights(set);
  CHECK(t.trade_off == 1);
  CHECK(t.best_similarity == 0);
  CHECK(t.best_magnitude == 2);
}

TEST_CASE("two-member fronts break the 45-degree tie by index") {
  ApproximationSet set = set_with({{0.0, 1.0}, {1.0, 0.0}});
  refresh_dominated_flags(set);
  CHECK(select_highlights(set).trade_off == 0);
}

TEST_CASE("worked trade-off for front {(1,5),(2,2),(5,1)}") {
  ApproximationSet set = set_with({{1.0, 5.0}, {2.0, 2.0}, {5.0, 1.0}});
  refresh_dominated_flags(set);
  CHECK(select_highlights(set).trade_off == 1);
}

TEST_CASE("single-member sets take every highlight role") {
  ApproximationSet set = set_with({{1.0, 1.0}});
  refresh_dominated_flags(set);
  const HighlightTriple t = select_highlights(set);
  CHECK(t.best_magnitude == 0);
  CHECK(t.best_similarity == 0);
  CHECK(t.trade_off == 0);
}

TEST_CASE("export produces a consistent, re-computable report") {
  RunConfig cfg = RunConfig::desk_preset("bspline-mo", "isolated-blob");
  cfg.sample_count = 300;
  cfg.population = 10;
  cfg.generations = 2;
  cfg.clusters = 5;
  RegistrationProblem prob = build_problem(cfg, 23);

  std::vector<ApproximationSet> sets;
  for (int rep = 0; rep < 2; ++rep) {
    BsplineTask task(prob);
    GomeaConfig gc;
    gc.population_size = 10;
    gc.generations = 2;
    gc.n_clusters = 5;
    gc.archive_capacity = 60;
    gc.seed = 100 + rep;
    MoGomea opt(task, gc);
    sets.push_back(result_to_set(opt.run(), "bspline-mo", gc.seed, rep));
  }
  const SamplePointSet common = draw_samples(prob.target, 300, 999);
  const AnalysisReport report = analyze_sets(sets, prob, common);

  const std::string out = "test_report_dir";
  export_report(report, prob, out);

  // row count equals the sum of set sizes
  std::ifstream csv(out + "/fronts.csv");
  REQUIRE(csv.good());
  std::string line;
  std::getline(csv, line);  // header
  std::size_t rows = 0;
  std::vector<std::vector<ObjectiveVector>> fronts(report.sets.size());
  while (std::getline(csv, line)) {
    ++rows;
    std::istringstream ss(line);
    std::string approach, rep_s, id, so, mo, sr, mr, dom;
    std::getline(ss, approach, ',');
    std::getline(ss, rep_s, ',');
    std::getline(ss, id, ',');
    std::getline(ss, so, ',');
    std::getline(ss, mo, ',');
    std::getline(ss, sr, ',');
    std::getline(ss, mr, ',');
    std::getline(ss, dom, ',');
    if (dom == "0")
      fronts[std::stoul(rep_s)].push_back({std::stod(sr), std::stod(mr)});
  }
  std::size_t expected = 0;
  for (const auto& s : report.sets) expected += s.solutions.size();
  CHECK(rows == expected);

  // hypervolumes recomputed from the CSV match the report
  for (std::size_t s = 0; s < report.sets.size(); ++s)
    CHECK(hypervolume_2d(fronts[report.sets[s].repetition], report.reference) ==
          doctest::Approx(report.hypervolumes[s]).epsilon(1e-9));

  CHECK(std::filesystem::exists(out + "/fronts.svg"));
  CHECK(std::filesystem::exists(out + "/hypervolume.csv"));
  CHECK(std::filesystem::exists(out + "/highlights.json"));
  std::filesystem::remove_all(out);
}

TEST_CASE("export handles an empty set list") {
  AnalysisReport report;
  RegistrationProblem prob;
  prob.target.geom.ndims = 2;
  prob.target.geom.dims = {4, 4, 1};
  prob.target.voxels.assign(16, 0.0f);
  prob.source = prob.target;
  const std::string out = "test_empty_report";
  export_report(report, prob, out);
  std::ifstream csv(out + "/fronts.csv");
  std::string line;
  CHECK(std::getline(csv, line));   // header present
  CHECK_FALSE(std::getline(csv, line));  // no rows
  CHECK(std::filesystem::exists(out + "/fronts.svg"));
  std::filesystem::remove_all(out);
}
