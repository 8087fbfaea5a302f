#include "dirw/runner.hpp"

#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include <json.hpp>

#include "dirw/tasks.hpp"

namespace dirw {

namespace fs = std::filesystem;
using nlohmann::json;

ModelKind approach_kind(const std::string& approach) {
  if (approach == "mesh-mo") return ModelKind::Mesh;
  if (approach == "bspline-baseline") return ModelKind::WeightTuning;
  if (approach == "bspline-mo") return ModelKind::BSpline;
  throw ConfigError("unknown approach '" + approach + "'");
}

RegistrationProblem build_problem(const RunConfig& config,
                                  std::uint64_t rep_seed) {
  RegistrationProblem problem;
  if (!config.phantom_kind.empty()) {
    PhantomSpec spec = desk_phantom_spec(config.phantom_kind == "multi-organ"
                                             ? PhantomKind::MultiOrgan
                                             : PhantomKind::IsolatedBlob);
    problem.source =
        generate_phantom(spec, PhantomState::Source, config.phantom_seed);
    problem.target =
        generate_phantom(spec, PhantomState::Target, config.phantom_seed);
  } else {
    problem.source = read_image(config.source_path);
    problem.target = read_image(config.target_path);
    if (!problem.source.geom.same_grid(problem.target.geom))
      throw DimensionMismatchError("source and target grids differ");
  }

  const std::size_t count =
      config.sample_count > 0 ? static_cast<std::size_t>(config.sample_count)
                              : problem.target.geom.voxel_count();
  problem.samples =
      draw_samples(problem.target, count, rep_seed ^ 0x5a17b1e5ULL);

  const int d = problem.target.geom.ndims;
  problem.bspline_config.control_points = config.grid_points;
  if (d == 2) problem.bspline_config.control_points[2] = 1;
  problem.mesh_config.n_points = config.mesh_points;
  return problem;
}

RunResult run_repetition(RegistrationProblem& problem, const RunConfig& config,
                         std::uint64_t seed, std::ostream* log) {
  GomeaConfig gomea;
  gomea.population_size = config.effective_population();
  gomea.generations = config.generations;
  gomea.n_clusters = config.clusters;
  gomea.archive_capacity = config.archive_capacity;
  gomea.seed = seed;

  const ModelKind kind = approach_kind(config.approach);
  if (kind == ModelKind::BSpline) {
    BsplineTask task(problem);
    MoGomea optimizer(task, gomea);
    return optimizer.run(log);
  }
  if (kind == ModelKind::Mesh) {
    problem.ensure_mesh();
    MeshTask task(problem);
    MoGomea optimizer(task, gomea);
    return optimizer.run(log);
  }
  return outer_optimize(problem, gomea, config.inner, log);
}

ApproximationSet result_to_set(const RunResult& result,
                               const std::string& approach,
                               std::uint64_t seed, int repetition) {
  ApproximationSet set;
  set.approach = approach;
  set.kind = approach_kind(approach);
  set.seed = seed;
  set.repetition = repetition;
  set.solutions.reserve(result.archive.size());
  for (const auto& entry : result.archive) {
    ReevaluatedSolution sol;
    sol.genotype = entry.genotype;
    sol.payload = entry.payload;
    sol.original = entry.objectives;
    set.solutions.push_back(std::move(sol));
  }
  return set;
}

void write_archive_dir(const std::string& dir, const RunConfig& config,
                       const RegistrationProblem& problem,
                       const RunResult& result, std::uint64_t seed,
                       int repetition, const std::string& log_text) {
  fs::create_directories(dir);
  const ModelKind kind = approach_kind(config.approach);

  json manifest;
  manifest["approach"] = config.approach;
  manifest["seed"] = seed;
  manifest["repetition"] = repetition;
  manifest["population"] = config.effective_population();
  manifest["generations"] = config.generations;
  manifest["clusters"] = config.clusters;
  manifest["archive_capacity"] = config.archive_capacity;
  manifest["sample_count"] = problem.samples.points.size();
  manifest["sample_seed"] = problem.samples.seed;
  manifest["phantom_kind"] = config.phantom_kind;
  manifest["phantom_seed"] = config.phantom_seed;
  manifest["grid_points"] = config.grid_points;
  manifest["mesh_points"] = config.mesh_points;
  if (kind == ModelKind::WeightTuning) {
    manifest["inner_samples"] = config.inner.sample_count;
    manifest["inner_iterations"] = config.inner.max_iterations;
  }
  manifest["reference_point"] = {result.reference_point.similarity,
                                 result.reference_point.magnitude};

  json elites = json::array();
  for (std::size_t i = 0; i < result.archive.size(); ++i) {
    const auto& entry = result.archive[i];
    char name[64];
    std::snprintf(name, sizeof(name), "elite_%04zu", i);
    json e;
    e["id"] = i;
    e["similarity"] = entry.objectives.similarity;
    e["magnitude"] = entry.objectives.magnitude;

    if (kind == ModelKind::Mesh) {
      DualMesh mesh = problem.mesh_template();
      mesh.unpack(entry.genotype);
      const std::string file = std::string(name) + ".dmsh";
      write_mesh(mesh, dir + "/" + file);
      e["genotype_file"] = file;
      e["fold_free"] = is_fold_free(mesh);
    } else {
      BSplineGrid grid = problem.make_grid();
      grid.unpack(kind == ModelKind::WeightTuning ? entry.payload
                                                  : entry.genotype);
      const std::string file = std::string(name) + ".bsg";
      write_grid(grid, dir + "/" + file);
      e["genotype_file"] = file;
      e["min_jacobian"] =
          min_jacobian_determinant(grid, problem.target.geom);
      if (kind == ModelKind::WeightTuning)
        e["weights"] = {entry.genotype[0], entry.genotype[1]};
    }
    elites.push_back(e);
  }
  manifest["elites"] = elites;

  std::ofstream mos(dir + "/manifest.json");
  if (!mos) throw IoError("cannot write " + dir + "/manifest.json");
  mos << manifest.dump(2) << "\n";

  std::ofstream los(dir + "/log.jsonl");
  if (!los) throw IoError("cannot write " + dir + "/log.jsonl");
  los << log_text;
}

ApproximationSet read_archive_dir(const std::string& dir,
                                  const RegistrationProblem& problem) {
  std::ifstream is(dir + "/manifest.json");
  if (!is) throw IoError("cannot open " + dir + "/manifest.json");
  json manifest;
  try {
    is >> manifest;
  } catch (const json::exception& e) {
    throw MalformedHeaderError(dir + "/manifest.json: " + e.what());
  }

  ApproximationSet set;
  set.approach = manifest.at("approach").get<std::string>();
  set.kind = approach_kind(set.approach);
  set.seed = manifest.at("seed").get<std::uint64_t>();
  set.repetition = manifest.at("repetition").get<int>();

  for (const json& e : manifest.at("elites")) {
    ReevaluatedSolution sol;
    sol.original.similarity = e.at("similarity").get<double>();
    sol.original.magnitude = e.at("magnitude").get<double>();
    const std::string file = dir + "/" + e.at("genotype_file").get<std::string>();
    if (set.kind == ModelKind::Mesh) {
      const DualMesh mesh = read_mesh(file);
      if (mesh.variable_count() != problem.mesh_template().variable_count())
        throw DimensionMismatchError(file + ": mesh does not match problem");
      sol.genotype = mesh.pack();
    } else if (set.kind == ModelKind::WeightTuning) {
      const BSplineGrid grid = read_grid(file);
      sol.payload = grid.pack();
      const auto w = e.at("weights");
      sol.genotype = {w.at(0).get<double>(), w.at(1).get<double>()};
    } else {
      const BSplineGrid grid = read_grid(file);
      if (grid.variable_count() != problem.make_grid().variable_count())
        throw DimensionMismatchError(file + ": grid does not match problem");
      sol.genotype = grid.pack();
    }
    set.solutions.push_back(std::move(sol));
  }
  return set;
}

std::vector<std::string> run_all_repetitions(const RunConfig& config,
                                             int workers) {
  fs::create_directories(config.out_dir);

  // problem metadata (and phantom images) for later analysis
  {
    json meta;
    meta["phantom_kind"] = config.phantom_kind;
    meta["phantom_seed"] = config.phantom_seed;
    if (!config.phantom_kind.empty()) {
      const PhantomSpec spec =
          desk_phantom_spec(config.phantom_kind == "multi-organ"
                                ? PhantomKind::MultiOrgan
                                : PhantomKind::IsolatedBlob);
      write_image(generate_phantom(spec, PhantomState::Source, config.phantom_seed),
                  config.out_dir + "/source.img");
      write_image(generate_phantom(spec, PhantomState::Target, config.phantom_seed),
                  config.out_dir + "/target.img");
      meta["source"] = "source.img";
      meta["target"] = "target.img";
      meta["blob_center"] = {spec.blob_center.x, spec.blob_center.y,
                             spec.blob_center.z};
      double rmax = 0.0;
      for (int a = 0; a < spec.geom.ndims; ++a)
        rmax = std::max(rmax, spec.source_radii[a]);
      meta["blob_radius"] = rmax;
    } else {
      // copy the image pair so the run directory is self-contained
      write_image(read_image(config.source_path), config.out_dir + "/source.img");
      write_image(read_image(config.target_path), config.out_dir + "/target.img");
      meta["source"] = "source.img";
      meta["target"] = "target.img";
    }
    std::ofstream os(config.out_dir + "/problem_meta.json");
    if (!os) throw IoError("cannot write problem_meta.json");
    os << meta.dump(2) << "\n";
  }

  std::vector<std::string> dirs(config.repetitions);
  const auto run_one = [&](int rep) {
    const std::uint64_t seed = config.base_seed + static_cast<std::uint64_t>(rep);
    RegistrationProblem problem = build_problem(config, seed);
    std::ostringstream log;
    const RunResult result = run_repetition(problem, config, seed, &log);
    char name[32];
    std::snprintf(name, sizeof(name), "rep_%03d", rep);
    const std::string dir = config.out_dir + "/" + name;
    write_archive_dir(dir, config, problem, result, seed, rep, log.str());
    return dir;
  };

  workers = std::max(1, workers);
  for (int begin = 0; begin < config.repetitions; begin += workers) {
    const int end = std::min(config.repetitions, begin + workers);
    std::vector<std::future<std::string>> futures;
    for (int rep = begin + 1; rep < end; ++rep)
      futures.push_back(std::async(std::launch::async, run_one, rep));
    dirs[begin] = run_one(begin);
    for (int rep = begin + 1; rep < end; ++rep)
      dirs[rep] = futures[rep - begin - 1].get();
  }
  return dirs;
}

std::optional<LocalityProbe> load_problem_probe(const std::string& dir) {
  std::ifstream is(dir + "/problem_meta.json");
  if (!is) return std::nullopt;
  json meta;
  try {
    is >> meta;
  } catch (const json::exception&) {
    return std::nullopt;
  }
  if (!meta.contains("blob_center") || !meta.contains("blob_radius"))
    return std::nullopt;
  LocalityProbe probe;
  probe.center = {meta["blob_center"][0].get<double>(),
                  meta["blob_center"][1].get<double>(),
                  meta["blob_center"][2].get<double>()};
  probe.radius = 2.0 * meta["blob_radius"].get<double>();
  return probe;
}

}  // namespace dirw
