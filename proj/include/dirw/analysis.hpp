#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dirw/objectives.hpp"

namespace dirw {

// One solution inside an approximation set, carrying both the objectives it
// was optimized under and the common re-evaluated ones.
struct ReevaluatedSolution {
  std::vector<double> genotype;
  std::vector<double> payload;
  ObjectiveVector original;
  ObjectiveVector reevaluated;
  bool dominated{false};  // under the re-evaluated objectives
  bool valid{true};
};

struct ApproximationSet {
  std::string approach;
  ModelKind kind{ModelKind::BSpline};
  std::uint64_t seed{0};
  int repetition{0};
  std::vector<ReevaluatedSolution> solutions;
};

// Voxel-based deformation magnitude of a DVF: sum over voxels of the mean
// squared difference to the face-adjacent neighbor vectors.
double common_def_magnitude(const DeformationField& dvf);

// Decoded inverse transform of a solution (model dispatch); owns its state.
std::function<WorldPoint(const WorldPoint&)> decode_transform(
    const std::vector<double>& genotype, const std::vector<double>& payload,
    ModelKind kind, const RegistrationProblem& problem);

// Re-evaluates every solution in a common pipeline: similarity on the shared
// sample set, magnitude from the rasterized DVF, dominance flags refreshed
// (dominated members are flagged, not removed).
void reevaluate_set(ApproximationSet& set, const RegistrationProblem& problem,
                    const SamplePointSet& common_samples);

// Recomputes the dominated flags from the re-evaluated vectors.
void refresh_dominated_flags(ApproximationSet& set);

// Exact 2-objective hypervolume (minimization); members beyond the reference
// contribute zero.
double hypervolume_2d(const std::vector<ObjectiveVector>& front,
                      const ObjectiveVector& reference);

// 1.1 x the per-objective maximum over all sets' non-dominated members.
ObjectiveVector common_reference(const std::vector<ApproximationSet>& sets);

// Index of the run with the median hypervolume (lower median for even
// counts, lowest index on ties).
std::size_t select_median_run(const std::vector<double>& hypervolumes);

struct HighlightTriple {
  int best_magnitude{-1};
  int best_similarity{-1};
  int trade_off{-1};
};

// Best-magnitude, best-similarity, and the 45-degree trade-off member of the
// non-dominated re-evaluated front.
HighlightTriple select_highlights(const ApproximationSet& set);

// Optional locality probe around a known structure (phantom problems).
double mean_dvf_magnitude_outside(const DeformationField& dvf,
                                  const Vec3& center, double radius);

struct AnalysisReport {
  std::vector<ApproximationSet> sets;  // re-evaluated
  std::vector<double> hypervolumes;    // parallel to sets
  ObjectiveVector reference;
  std::map<std::string, std::size_t> median_set_index;  // per approach
  std::map<std::string, HighlightTriple> highlights;    // of the median set
};

// Full comparison pipeline over original approximation sets.
AnalysisReport analyze_sets(std::vector<ApproximationSet> sets,
                            const RegistrationProblem& problem,
                            const SamplePointSet& common_samples);

struct LocalityProbe {
  Vec3 center;
  double radius{0.0};
};

// Writes fronts.csv, hypervolume.csv, highlights.json, highlight DVF files,
// and fronts.svg under the output directory.
void export_report(const AnalysisReport& report,
                   const RegistrationProblem& problem,
                   const std::string& out_dir,
                   const std::optional<LocalityProbe>& probe = std::nullopt);

}  // namespace dirw
