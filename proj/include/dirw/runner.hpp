#pragma once

#include <optional>

#include "dirw/analysis.hpp"
#include "dirw/config.hpp"

namespace dirw {

ModelKind approach_kind(const std::string& approach);

// Loads or generates the image pair and fixes the per-run sample set.
RegistrationProblem build_problem(const RunConfig& config, std::uint64_t rep_seed);

// Runs one repetition of the configured approach.
RunResult run_repetition(RegistrationProblem& problem, const RunConfig& config,
                         std::uint64_t seed, std::ostream* log);

// Converts a finished run into an approximation set (original objectives
// filled; re-evaluation happens in the analysis pipeline).
ApproximationSet result_to_set(const RunResult& result,
                               const std::string& approach,
                               std::uint64_t seed, int repetition);

// Archive directory I/O: manifest.json + one genotype file per elite +
// log.jsonl.
void write_archive_dir(const std::string& dir, const RunConfig& config,
                       const RegistrationProblem& problem,
                       const RunResult& result, std::uint64_t seed,
                       int repetition, const std::string& log_text);
ApproximationSet read_archive_dir(const std::string& dir,
                                  const RegistrationProblem& problem);

// Runs all repetitions (seed = base_seed + repetition index), writing one
// archive directory per repetition under config.out_dir. Repetitions execute
// on up to `workers` threads; results are identical regardless of the count.
std::vector<std::string> run_all_repetitions(const RunConfig& config,
                                             int workers);

// Optional analysis probe metadata written next to generated phantoms.
std::optional<LocalityProbe> load_problem_probe(const std::string& dir);

}  // namespace dirw
