#include "dirw/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>

#include <json.hpp>

namespace dirw {

double common_def_magnitude(const DeformationField& dvf) {
  const GridGeometry& g = dvf.geom;
  const int nk = g.ndims == 3 ? g.dims[2] : 1;
  double total = 0.0;
  for (int k = 0; k < nk; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        const Vec3& v = dvf.at(i, j, k);
        const int di[6] = {-1, 1, 0, 0, 0, 0};
        const int dj[6] = {0, 0, -1, 1, 0, 0};
        const int dk[6] = {0, 0, 0, 0, -1, 1};
        double sum = 0.0;
        int n = 0;
        for (int q = 0; q < 2 * g.ndims; ++q) {
          const int ii = i + di[q], jj = j + dj[q], kk = k + dk[q];
          if (ii < 0 || jj < 0 || kk < 0 || ii >= g.dims[0] ||
              jj >= g.dims[1] || kk >= nk)
            continue;
          sum += (v - dvf.at(ii, jj, kk)).norm2();
          ++n;
        }
        if (n > 0) total += sum / n;
      }
  return total;
}

std::function<WorldPoint(const WorldPoint&)> decode_transform(
    const std::vector<double>& genotype, const std::vector<double>& payload,
    ModelKind kind, const RegistrationProblem& problem) {
  if (kind == ModelKind::Mesh) {
    auto mesh = std::make_shared<DualMesh>(problem.mesh_template());
    mesh->unpack(genotype);
    auto locator = std::make_shared<MeshLocator>(*mesh);
    return [mesh, locator](const WorldPoint& p) {
      return apply_location(*mesh, locator->locate_or_nearest(p));
    };
  }
  auto grid = std::make_shared<BSplineGrid>(problem.make_grid());
  if (kind == ModelKind::WeightTuning)
    grid->unpack(payload);
  else
    grid->unpack(genotype);
  return [grid](const WorldPoint& p) { return p + displacement(*grid, p); };
}

void reevaluate_set(ApproximationSet& set, const RegistrationProblem& problem,
                    const SamplePointSet& common_samples) {
  for (ReevaluatedSolution& sol : set.solutions) {
    try {
      const auto transform =
          decode_transform(sol.genotype, sol.payload, set.kind, problem);
      sol.reevaluated.similarity =
          ssd(problem.source, problem.target, transform, common_samples);
      const DeformationField dvf = rasterize_dvf(transform, problem.target.geom);
      sol.reevaluated.magnitude = common_def_magnitude(dvf);
      sol.valid = sol.reevaluated.finite();
    } catch (const std::exception&) {
      sol.valid = false;
    }
  }
  refresh_dominated_flags(set);
}

// dominance re-filtering: flagged, not removed
void refresh_dominated_flags(ApproximationSet& set) {
  for (ReevaluatedSolution& a : set.solutions) {
    a.dominated = false;
    if (!a.valid) continue;
    for (const ReevaluatedSolution& b : set.solutions) {
      if (&a == &b || !b.valid) continue;
      if (dominates(b.reevaluated, a.reevaluated)) {
        a.dominated = true;
        break;
      }
    }
  }
}

double hypervolume_2d(const std::vector<ObjectiveVector>& front,
                      const ObjectiveVector& reference) {
  // non-dominated members weakly dominating the reference
  std::vector<ObjectiveVector> pts;
  for (const ObjectiveVector& p : front) {
    if (!(p.similarity <= reference.similarity &&
          p.magnitude <= reference.magnitude))
      continue;  // beyond the reference: zero contribution
    bool dominated = false;
    for (const ObjectiveVector& q : front)
      if (dominates(q, p)) {
        dominated = true;
        break;
      }
    if (!dominated) pts.push_back(p);
  }
  if (pts.empty()) return 0.0;
  std::sort(pts.begin(), pts.end(), [](const ObjectiveVector& a,
                                       const ObjectiveVector& b) {
    if (a.similarity != b.similarity) return a.similarity < b.similarity;
    return a.magnitude < b.magnitude;
  });
  // duplicates in similarity: keep the best magnitude
  std::vector<ObjectiveVector> sweep;
  for (const ObjectiveVector& p : pts) {
    if (!sweep.empty() && sweep.back().similarity == p.similarity) continue;
    sweep.push_back(p);
  }
  double hv = 0.0;
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    const double next_sim =
        i + 1 < sweep.size() ? sweep[i + 1].similarity : reference.similarity;
    hv += (next_sim - sweep[i].similarity) *
          (reference.magnitude - sweep[i].magnitude);
  }
  return hv;
}

ObjectiveVector common_reference(const std::vector<ApproximationSet>& sets) {
  double max_sim = -std::numeric_limits<double>::infinity();
  double max_mag = -std::numeric_limits<double>::infinity();
  for (const ApproximationSet& set : sets)
    for (const ReevaluatedSolution& sol : set.solutions) {
      if (!sol.valid || sol.dominated) continue;
      max_sim = std::max(max_sim, sol.reevaluated.similarity);
      max_mag = std::max(max_mag, sol.reevaluated.magnitude);
    }
  if (!std::isfinite(max_sim)) return {1.0, 1.0};
  return {1.1 * max_sim, 1.1 * max_mag};
}

std::size_t select_median_run(const std::vector<double>& hypervolumes) {
  if (hypervolumes.empty()) throw ConfigError("median of zero runs");
  std::vector<double> sorted = hypervolumes;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[(sorted.size() - 1) / 2];  // lower median
  for (std::size_t i = 0; i < hypervolumes.size(); ++i)
    if (hypervolumes[i] == median) return i;
  return 0;
}

HighlightTriple select_highlights(const ApproximationSet& set) {
  std::vector<int> front;
  for (std::size_t i = 0; i < set.solutions.size(); ++i)
    if (set.solutions[i].valid && !set.solutions[i].dominated)
      front.push_back(static_cast<int>(i));
  HighlightTriple triple;
  if (front.empty()) return triple;

  auto better_mag = [&](int a, int b) {
    const auto& oa = set.solutions[a].reevaluated;
    const auto& ob = set.solutions[b].reevaluated;
    if (oa.magnitude != ob.magnitude) return oa.magnitude < ob.magnitude;
    return oa.similarity < ob.similarity;
  };
  auto better_sim = [&](int a, int b) {
    const auto& oa = set.solutions[a].reevaluated;
    const auto& ob = set.solutions[b].reevaluated;
    if (oa.similarity != ob.similarity) return oa.similarity < ob.similarity;
    return oa.magnitude < ob.magnitude;
  };
  triple.best_magnitude = front[0];
  triple.best_similarity = front[0];
  for (int i : front) {
    if (better_mag(i, triple.best_magnitude)) triple.best_magnitude = i;
    if (better_sim(i, triple.best_similarity)) triple.best_similarity = i;
  }

  // min-max normalize over the non-dominated subset, then pick the member
  // whose objective vector angle is closest to 45 degrees
  double lo[2] = {std::numeric_limits<double>::infinity(),
                  std::numeric_limits<double>::infinity()};
  double hi[2] = {-std::numeric_limits<double>::infinity(),
                  -std::numeric_limits<double>::infinity()};
  for (int i : front) {
    const auto& o = set.solutions[i].reevaluated;
    lo[0] = std::min(lo[0], o.similarity);
    hi[0] = std::max(hi[0], o.similarity);
    lo[1] = std::min(lo[1], o.magnitude);
    hi[1] = std::max(hi[1], o.magnitude);
  }
  const double target = std::atan(1.0);  // 45 degrees
  triple.trade_off = front[0];
  double best_gap = std::numeric_limits<double>::infinity();
  for (int i : front) {
    const auto& o = set.solutions[i].reevaluated;
    const double ns =
        hi[0] > lo[0] ? (o.similarity - lo[0]) / (hi[0] - lo[0]) : 0.0;
    const double nm =
        hi[1] > lo[1] ? (o.magnitude - lo[1]) / (hi[1] - lo[1]) : 0.0;
    const double gap = std::abs(std::atan2(nm, ns) - target);
    if (gap < best_gap) {
      best_gap = gap;
      triple.trade_off = i;
    }
  }
  return triple;
}

double mean_dvf_magnitude_outside(const DeformationField& dvf,
                                  const Vec3& center, double radius) {
  const GridGeometry& g = dvf.geom;
  const int nk = g.ndims == 3 ? g.dims[2] : 1;
  double sum = 0.0;
  std::size_t count = 0;
  for (int k = 0; k < nk; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        const WorldPoint p = g.voxel_center(i, j, k);
        if ((p - center).norm() <= radius) continue;
        sum += dvf.at(i, j, k).norm();
        ++count;
      }
  return count > 0 ? sum / count : 0.0;
}

AnalysisReport analyze_sets(std::vector<ApproximationSet> sets,
                            const RegistrationProblem& problem,
                            const SamplePointSet& common_samples) {
  AnalysisReport report;
  for (ApproximationSet& set : sets)
    reevaluate_set(set, problem, common_samples);

  report.reference = common_reference(sets);
  report.hypervolumes.reserve(sets.size());
  for (const ApproximationSet& set : sets) {
    std::vector<ObjectiveVector> front;
    for (const ReevaluatedSolution& sol : set.solutions)
      if (sol.valid && !sol.dominated) front.push_back(sol.reevaluated);
    report.hypervolumes.push_back(hypervolume_2d(front, report.reference));
  }

  // per-approach median repetition and its highlights
  std::map<std::string, std::vector<std::size_t>> by_approach;
  for (std::size_t i = 0; i < sets.size(); ++i)
    by_approach[sets[i].approach].push_back(i);
  for (const auto& [approach, indices] : by_approach) {
    std::vector<double> hvs;
    for (std::size_t i : indices) hvs.push_back(report.hypervolumes[i]);
    const std::size_t median = indices[select_median_run(hvs)];
    report.median_set_index[approach] = median;
    report.highlights[approach] = select_highlights(sets[median]);
  }

  report.sets = std::move(sets);
  return report;
}

// ---------------------------------------------------------------------------
// Report export
// ---------------------------------------------------------------------------

namespace {

const char* role_name(int role) {
  switch (role) {
    case 0: return "best_magnitude";
    case 1: return "best_similarity";
    case 2: return "trade_off";
  }
  return "";
}

std::string approach_color(const std::string& approach, bool dominated) {
  std::string color = "#7f7f7f";
  if (approach == "bspline-mo") color = dominated ? "#9ecae1" : "#1f77b4";
  else if (approach == "mesh-mo") color = dominated ? "#a1d99b" : "#2ca02c";
  else if (approach == "bspline-baseline") color = dominated ? "#fc9272" : "#d62728";
  return color;
}

void write_svg(const AnalysisReport& report, const std::string& path) {
  double lo[2] = {std::numeric_limits<double>::infinity(),
                  std::numeric_limits<double>::infinity()};
  double hi[2] = {-std::numeric_limits<double>::infinity(),
                  -std::numeric_limits<double>::infinity()};
  for (const ApproximationSet& set : report.sets)
    for (const ReevaluatedSolution& sol : set.solutions) {
      if (!sol.valid) continue;
      lo[0] = std::min(lo[0], sol.reevaluated.similarity);
      hi[0] = std::max(hi[0], sol.reevaluated.similarity);
      lo[1] = std::min(lo[1], sol.reevaluated.magnitude);
      hi[1] = std::max(hi[1], sol.reevaluated.magnitude);
    }
  const bool empty = !std::isfinite(lo[0]);
  if (empty) {
    lo[0] = lo[1] = 0.0;
    hi[0] = hi[1] = 1.0;
  }
  for (int j = 0; j < 2; ++j)
    if (hi[j] <= lo[j]) hi[j] = lo[j] + 1.0;

  const double W = 760, H = 560, ml = 70, mr = 180, mt = 30, mb = 60;
  auto sx = [&](double v) {
    return ml + (v - lo[0]) / (hi[0] - lo[0]) * (W - ml - mr);
  };
  auto sy = [&](double v) {
    return H - mb - (v - lo[1]) / (hi[1] - lo[1]) * (H - mt - mb);
  };

  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
     << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr
     << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
     << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 18
     << "\" text-anchor=\"middle\" font-size=\"14\">similarity (re-evaluated)"
        "</text>\n";
  os << "<text x=\"18\" y=\"" << (mt + H - mb) / 2
     << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 18 "
     << (mt + H - mb) / 2 << ")\">deformation magnitude (re-evaluated)</text>\n";

  // dominated first so the front draws on top
  for (int pass = 0; pass < 2; ++pass)
    for (const ApproximationSet& set : report.sets)
      for (const ReevaluatedSolution& sol : set.solutions) {
        if (!sol.valid) continue;
        if ((pass == 0) != sol.dominated) continue;
        os << "<circle cx=\"" << sx(sol.reevaluated.similarity) << "\" cy=\""
           << sy(sol.reevaluated.magnitude) << "\" r=\"3\" fill=\""
           << approach_color(set.approach, sol.dominated) << "\"/>\n";
      }

  double ly = mt + 10;
  for (const auto& [approach, _] : report.median_set_index) {
    os << "<circle cx=\"" << W - mr + 16 << "\" cy=\"" << ly << "\" r=\"5\" "
       << "fill=\"" << approach_color(approach, false) << "\"/>\n";
    os << "<text x=\"" << W - mr + 28 << "\" y=\"" << ly + 4
       << "\" font-size=\"13\">" << approach << "</text>\n";
    ly += 22;
  }
  os << "</svg>\n";
}

}  // namespace

void export_report(const AnalysisReport& report,
                   const RegistrationProblem& problem,
                   const std::string& out_dir,
                   const std::optional<LocalityProbe>& probe) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  {
    std::ofstream os(out_dir + "/fronts.csv");
    if (!os) throw IoError("cannot write " + out_dir + "/fronts.csv");
    os.precision(17);
    os << "approach,repetition,solution_id,sim_orig,mag_orig,sim_reeval,"
          "mag_reeval,dominated_flag,highlight_role\n";
    for (std::size_t s = 0; s < report.sets.size(); ++s) {
      const ApproximationSet& set = report.sets[s];
      const bool is_median =
          report.median_set_index.count(set.approach) &&
          report.median_set_index.at(set.approach) == s;
      const HighlightTriple* triple =
          is_median ? &report.highlights.at(set.approach) : nullptr;
      for (std::size_t i = 0; i < set.solutions.size(); ++i) {
        const ReevaluatedSolution& sol = set.solutions[i];
        std::string role;
        if (triple) {
          if (static_cast<int>(i) == triple->best_magnitude)
            role = role_name(0);
          else if (static_cast<int>(i) == triple->best_similarity)
            role = role_name(1);
          else if (static_cast<int>(i) == triple->trade_off)
            role = role_name(2);
        }
        os << set.approach << ',' << set.repetition << ',' << i << ','
           << sol.original.similarity << ',' << sol.original.magnitude << ','
           << sol.reevaluated.similarity << ',' << sol.reevaluated.magnitude
           << ',' << (sol.dominated ? 1 : 0) << ',' << role << "\n";
      }
    }
  }

  {
    std::ofstream os(out_dir + "/hypervolume.csv");
    if (!os) throw IoError("cannot write " + out_dir + "/hypervolume.csv");
    os.precision(17);
    os << "approach,repetition,hypervolume,selected_median\n";
    for (std::size_t s = 0; s < report.sets.size(); ++s) {
      const ApproximationSet& set = report.sets[s];
      const bool is_median =
          report.median_set_index.count(set.approach) &&
          report.median_set_index.at(set.approach) == s;
      os << set.approach << ',' << set.repetition << ','
         << report.hypervolumes[s] << ',' << (is_median ? 1 : 0) << "\n";
    }
  }

  nlohmann::json highlights = nlohmann::json::object();
  highlights["reference"] = {report.reference.similarity,
                             report.reference.magnitude};
  for (const auto& [approach, median] : report.median_set_index) {
    const ApproximationSet& set = report.sets[median];
    const HighlightTriple& triple = report.highlights.at(approach);
    nlohmann::json entry;
    entry["repetition"] = set.repetition;
    const int ids[3] = {triple.best_magnitude, triple.best_similarity,
                        triple.trade_off};
    for (int r = 0; r < 3; ++r) {
      if (ids[r] < 0) continue;
      const ReevaluatedSolution& sol = set.solutions[ids[r]];
      nlohmann::json h;
      h["solution_id"] = ids[r];
      h["sim_reeval"] = sol.reevaluated.similarity;
      h["mag_reeval"] = sol.reevaluated.magnitude;
      const std::string dvf_file =
          out_dir + "/highlight_" + approach + "_" + role_name(r) + ".dvf";
      const auto transform =
          decode_transform(sol.genotype, sol.payload, set.kind, problem);
      const DeformationField dvf =
          rasterize_dvf(transform, problem.target.geom);
      write_dvf(dvf, dvf_file);
      h["dvf_file"] = fs::path(dvf_file).filename().string();
      if (probe) {
        h["mean_dvf_magnitude_outside_probe"] =
            mean_dvf_magnitude_outside(dvf, probe->center, probe->radius);
        h["probe_radius"] = probe->radius;
      }
      entry[role_name(r)] = h;
    }
    highlights[approach] = entry;
  }
  {
    std::ofstream os(out_dir + "/highlights.json");
    if (!os) throw IoError("cannot write " + out_dir + "/highlights.json");
    os << highlights.dump(2) << "\n";
  }

  write_svg(report, out_dir + "/fronts.svg");
}

}  // namespace dirw
