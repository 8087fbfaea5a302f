#include "dirw/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "dirw/runner.hpp"

namespace dirw {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

PhantomSpec spec_from_config(const ConfigMap& map, const std::string& kind) {
  PhantomSpec spec = desk_phantom_spec(
      kind == "multi-organ" ? PhantomKind::MultiOrgan : PhantomKind::IsolatedBlob);
  if (!map.count("phantom")) return spec;
  const auto& s = map.at("phantom");
  const auto get = [&](const std::string& key, auto setter) {
    const auto it = s.find(key);
    if (it == s.end()) return;
    std::istringstream ss(it->second);
    setter(ss);
  };
  int ndims = spec.geom.ndims;
  get("dims", [&](std::istringstream& ss) {
    std::array<int, 3> dims{1, 1, 1};
    int n = 0;
    while (n < 3 && (ss >> dims[n])) ++n;
    if (n < 2) throw ConfigError("phantom dims needs 2 or 3 values");
    ndims = n;
    spec.geom.ndims = n;
    spec.geom.dims = dims;
  });
  get("spacing", [&](std::istringstream& ss) {
    for (int a = 0; a < ndims; ++a)
      if (!(ss >> spec.geom.spacing[a]))
        throw ConfigError("phantom spacing needs one value per axis");
  });
  get("blob_center", [&](std::istringstream& ss) {
    for (int a = 0; a < ndims; ++a) ss >> spec.blob_center[a];
  });
  get("source_radii", [&](std::istringstream& ss) {
    for (int a = 0; a < ndims; ++a) ss >> spec.source_radii[a];
  });
  get("target_radii", [&](std::istringstream& ss) {
    for (int a = 0; a < ndims; ++a) ss >> spec.target_radii[a];
  });
  get("background", [&](std::istringstream& ss) { ss >> spec.background; });
  get("blob_intensity", [&](std::istringstream& ss) { ss >> spec.blob_intensity; });
  get("bone_intensity", [&](std::istringstream& ss) { ss >> spec.bone_intensity; });
  get("tube_intensity", [&](std::istringstream& ss) { ss >> spec.tube_intensity; });
  get("margin", [&](std::istringstream& ss) { ss >> spec.margin_mm; });
  get("texture_amplitude",
      [&](std::istringstream& ss) { ss >> spec.texture_amplitude; });
  if (!map.at("phantom").count("blob_center")) {
    // default to the domain center when dims changed
    for (int a = 0; a < ndims; ++a)
      spec.blob_center[a] =
          spec.geom.origin[a] + 0.5 * (spec.geom.dims[a] - 1) * spec.geom.spacing[a];
  }
  spec.kind = kind == "multi-organ" ? PhantomKind::MultiOrgan
                                    : PhantomKind::IsolatedBlob;
  return spec;
}

int cmd_phantom(const std::string& spec_path, const std::string& out_dir,
                std::uint64_t seed) {
  ConfigMap map;
  std::string kind = "isolated-blob";
  if (!spec_path.empty()) {
    map = parse_config_file(spec_path);
    if (map.count("phantom") && map.at("phantom").count("kind"))
      kind = map.at("phantom").at("kind");
  }
  std::vector<std::string> kinds;
  if (kind == "both") {
    kinds = {"isolated-blob", "multi-organ"};
  } else if (kind == "isolated-blob" || kind == "multi-organ") {
    kinds = {kind};
  } else {
    throw ConfigError("unknown phantom kind '" + kind + "'");
  }

  fs::create_directories(out_dir);
  for (const std::string& k : kinds) {
    const PhantomSpec spec = spec_from_config(map, k);
    const std::string stem = out_dir + "/" + k;
    write_image(generate_phantom(spec, PhantomState::Source, seed),
                stem + "_source.img");
    write_image(generate_phantom(spec, PhantomState::Target, seed),
                stem + "_target.img");
    json meta;
    meta["phantom_kind"] = k;
    meta["phantom_seed"] = seed;
    meta["source"] = k + "_source.img";
    meta["target"] = k + "_target.img";
    meta["blob_center"] = {spec.blob_center.x, spec.blob_center.y,
                           spec.blob_center.z};
    double rmax = 0.0;
    for (int a = 0; a < spec.geom.ndims; ++a)
      rmax = std::max(rmax, spec.source_radii[a]);
    meta["blob_radius"] = rmax;
    std::ofstream os(stem + "_meta.json");
    if (!os) throw IoError("cannot write " + stem + "_meta.json");
    os << meta.dump(2) << "\n";
    std::cout << "wrote " << stem << "_source.img, " << stem << "_target.img\n";
  }
  return 0;
}

int workers_from_env(bool deterministic) {
  if (deterministic) return 1;
  if (const char* env = std::getenv("DIRW_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// rebuilds the problem an archive was produced on, from its manifests
RegistrationProblem problem_from_manifest(const std::string& problem_dir,
                                          const json& manifest,
                                          long long sample_override,
                                          std::uint64_t common_seed) {
  std::ifstream is(problem_dir + "/problem_meta.json");
  if (!is) throw IoError("cannot open " + problem_dir + "/problem_meta.json");
  json meta;
  is >> meta;

  RunConfig cfg;
  cfg.phantom_kind = meta.value("phantom_kind", std::string{});
  cfg.phantom_seed = meta.value("phantom_seed", 7ULL);
  if (cfg.phantom_kind.empty()) {
    cfg.source_path = problem_dir + "/" + meta.at("source").get<std::string>();
    cfg.target_path = problem_dir + "/" + meta.at("target").get<std::string>();
  }
  const auto gp = manifest.at("grid_points");
  cfg.grid_points = {gp.at(0).get<int>(), gp.at(1).get<int>(),
                     gp.size() > 2 ? gp.at(2).get<int>() : 1};
  cfg.mesh_points = manifest.at("mesh_points").get<int>();
  cfg.sample_count = sample_override;
  cfg.approach = manifest.at("approach").get<std::string>();

  return build_problem(cfg, common_seed);
}

std::vector<std::string> collect_rep_dirs(const std::vector<std::string>& dirs) {
  std::vector<std::string> reps;
  for (const std::string& dir : dirs) {
    if (fs::exists(fs::path(dir) / "manifest.json")) {
      reps.push_back(dir);
      continue;
    }
    std::vector<std::string> found;
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_directory() &&
          fs::exists(entry.path() / "manifest.json"))
        found.push_back(entry.path().string());
    std::sort(found.begin(), found.end());
    if (found.empty()) throw IoError("no archives found under " + dir);
    reps.insert(reps.end(), found.begin(), found.end());
  }
  return reps;
}

int cmd_analyze(const std::string& problem_dir,
                const std::vector<std::string>& archive_dirs,
                const std::string& out_dir, long long samples,
                std::uint64_t common_seed) {
  const std::vector<std::string> reps = collect_rep_dirs(archive_dirs);

  json first;
  {
    std::ifstream is(reps.front() + "/manifest.json");
    if (!is) throw IoError("cannot open " + reps.front() + "/manifest.json");
    is >> first;
  }
  RegistrationProblem problem =
      problem_from_manifest(problem_dir, first, samples, common_seed);
  problem.ensure_mesh();

  std::vector<ApproximationSet> sets;
  sets.reserve(reps.size());
  for (const std::string& rep : reps)
    sets.push_back(read_archive_dir(rep, problem));

  const SamplePointSet common = draw_samples(
      problem.target,
      samples > 0 ? static_cast<std::size_t>(samples)
                  : problem.target.geom.voxel_count(),
      common_seed);

  const AnalysisReport report = analyze_sets(std::move(sets), problem, common);
  export_report(report, problem, out_dir, load_problem_probe(problem_dir));

  std::cout << "analyzed " << reps.size() << " archives; report in " << out_dir
            << "\n";
  for (const auto& [approach, idx] : report.median_set_index)
    std::cout << "  median repetition for " << approach << ": "
              << report.sets[idx].repetition
              << " (hv=" << report.hypervolumes[idx] << ")\n";
  return 0;
}

int cmd_reevaluate(const std::string& problem_dir, const std::string& archive,
                   const std::string& out_csv, long long samples,
                   std::uint64_t common_seed) {
  json manifest;
  {
    std::ifstream is(archive + "/manifest.json");
    if (!is) throw IoError("cannot open " + archive + "/manifest.json");
    is >> manifest;
  }
  RegistrationProblem problem =
      problem_from_manifest(problem_dir, manifest, samples, common_seed);
  problem.ensure_mesh();
  ApproximationSet set = read_archive_dir(archive, problem);
  const SamplePointSet common = draw_samples(
      problem.target,
      samples > 0 ? static_cast<std::size_t>(samples)
                  : problem.target.geom.voxel_count(),
      common_seed);
  reevaluate_set(set, problem, common);

  std::ofstream os(out_csv);
  if (!os) throw IoError("cannot write " + out_csv);
  os.precision(17);
  os << "solution_id,sim_orig,mag_orig,sim_reeval,mag_reeval,dominated_flag\n";
  for (std::size_t i = 0; i < set.solutions.size(); ++i) {
    const ReevaluatedSolution& sol = set.solutions[i];
    os << i << ',' << sol.original.similarity << ',' << sol.original.magnitude
       << ',' << sol.reevaluated.similarity << ',' << sol.reevaluated.magnitude
       << ',' << (sol.dominated ? 1 : 0) << "\n";
  }
  std::cout << "re-evaluated " << set.solutions.size() << " solutions -> "
            << out_csv << "\n";
  return 0;
}

int cmd_hv(const std::string& front_csv, double ref_sim, double ref_mag) {
  std::ifstream is(front_csv);
  if (!is) throw IoError("cannot open " + front_csv);
  std::vector<ObjectiveVector> front;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double s, m;
    if (ss >> s >> m) front.push_back({s, m});
  }
  std::cout.precision(17);
  std::cout << hypervolume_2d(front, {ref_sim, ref_mag}) << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"dirw: deformable image registration workbench"};
  app.require_subcommand(1);

  // phantom
  auto* phantom = app.add_subcommand(
      "phantom", "generate synthetic source/target image pairs");
  std::string spec_path, phantom_out = "phantom";
  std::uint64_t phantom_seed = 7;
  phantom->add_option("--spec", spec_path, "phantom spec file");
  phantom->add_option("--out", phantom_out, "output directory");
  phantom->add_option("--seed", phantom_seed, "generation seed");

  // register
  auto* reg = app.add_subcommand("register", "run a registration approach");
  std::string config_path, preset, approach, out_dir;
  int population = 0, generations = -1, repetitions = 0;
  std::uint64_t base_seed = 0;
  long long sample_count = -1;
  bool deterministic = false;
  int workers_flag = 0;
  reg->add_option("--config", config_path, "run configuration file");
  reg->add_option("--preset", preset,
                  "bundled preset: desk-blob or desk-organs");
  reg->add_option("--approach", approach,
                  "bspline-mo | mesh-mo | bspline-baseline");
  reg->add_option("--out", out_dir, "output directory");
  reg->add_option("--population", population, "population size override");
  reg->add_option("--generations", generations, "generation count override");
  reg->add_option("--repetitions", repetitions, "repetition count override");
  reg->add_option("--seed", base_seed, "base seed override");
  reg->add_option("--sample-count", sample_count, "sample count override");
  reg->add_flag("--deterministic", deterministic,
                "single worker, bit-reproducible ordering");
  reg->add_option("--workers", workers_flag, "parallel repetition workers");

  // analyze
  auto* analyze = app.add_subcommand(
      "analyze", "re-evaluate archives and export the comparison report");
  std::string problem_dir, analyze_out = "report";
  std::vector<std::string> archives;
  long long analyze_samples = 0;
  std::uint64_t common_seed = 0xC0117;
  analyze->add_option("--problem", problem_dir, "run directory holding problem_meta.json")
      ->required();
  analyze->add_option("--out", analyze_out, "report output directory");
  analyze->add_option("archives", archives, "run or repetition directories")
      ->required();
  analyze->add_option("--samples", analyze_samples,
                      "common re-evaluation sample count (0 = voxel count)");
  analyze->add_option("--common-seed", common_seed,
                      "shared re-evaluation sample seed");

  // reevaluate
  auto* reeval = app.add_subcommand(
      "reevaluate", "re-evaluate a single archive into a CSV");
  std::string reeval_problem, reeval_archive, reeval_out = "reevaluated.csv";
  long long reeval_samples = 0;
  std::uint64_t reeval_seed = 0xC0117;
  reeval->add_option("--problem", reeval_problem, "run directory holding problem_meta.json")
      ->required();
  reeval->add_option("--archive", reeval_archive, "repetition directory")
      ->required();
  reeval->add_option("--out", reeval_out, "output CSV path");
  reeval->add_option("--samples", reeval_samples, "sample count (0 = voxel count)");
  reeval->add_option("--common-seed", reeval_seed, "sample seed");

  // hv
  auto* hv = app.add_subcommand("hv", "hypervolume of a 2-column front CSV");
  std::string hv_front;
  std::vector<double> hv_ref;
  hv->add_option("--front", hv_front, "CSV with similarity,magnitude rows")
      ->required();
  hv->add_option("--ref", hv_ref, "reference point (two values)")
      ->required()
      ->expected(2);

  try {
    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*phantom) return cmd_phantom(spec_path, phantom_out, phantom_seed);
    if (*reg) {
      RunConfig cfg;
      if (!config_path.empty()) {
        cfg = RunConfig::from_config(parse_config_file(config_path));
      } else if (!preset.empty()) {
        if (preset != "desk-blob" && preset != "desk-organs")
          throw ConfigError("unknown preset '" + preset + "'");
        if (approach.empty())
          throw ConfigError("--preset requires --approach");
        cfg = RunConfig::desk_preset(
            approach, preset == "desk-organs" ? "multi-organ" : "isolated-blob");
      } else {
        throw ConfigError("register needs --config or --preset");
      }
      if (!approach.empty()) cfg.approach = approach;
      if (population > 0) cfg.population = population;
      if (generations >= 0) cfg.generations = generations;
      if (repetitions > 0) cfg.repetitions = repetitions;
      if (base_seed != 0) cfg.base_seed = base_seed;
      if (sample_count >= 0) cfg.sample_count = sample_count;
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      cfg.validate();
      const int workers =
          workers_flag > 0 ? workers_flag : workers_from_env(deterministic);
      const auto dirs = run_all_repetitions(cfg, deterministic ? 1 : workers);
      std::cout << "wrote " << dirs.size() << " archive directories under "
                << cfg.out_dir << "\n";
      return 0;
    }
    if (*analyze)
      return cmd_analyze(problem_dir, archives, analyze_out, analyze_samples,
                         common_seed);
    if (*reeval)
      return cmd_reevaluate(reeval_problem, reeval_archive, reeval_out,
                            reeval_samples, reeval_seed);
    if (*hv) return cmd_hv(hv_front, hv_ref[0], hv_ref[1]);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const EvalError& e) {
    std::cerr << "evaluation error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace dirw
