#include "dirw/tasks.hpp"

#include <algorithm>
#include <cmath>

namespace dirw {

// ---------------------------------------------------------------------------
// BsplineTask
// ---------------------------------------------------------------------------

BsplineTask::BsplineTask(const RegistrationProblem& problem)
    : problem_(problem), template_grid_(problem.make_grid()) {
  buckets_.build(template_grid_, problem_.samples.points);
}

std::size_t BsplineTask::variable_count() const {
  return template_grid_.variable_count();
}

std::vector<FosElement> BsplineTask::build_fos() const {
  std::vector<FosElement> fos;
  const int d = template_grid_.ndims;
  fos.reserve(template_grid_.point_count());
  for (std::size_t p = 0; p < template_grid_.point_count(); ++p) {
    FosElement el;
    el.variables.resize(d);
    for (int a = 0; a < d; ++a) el.variables[a] = static_cast<int>(p) * d + a;
    el.region = affected_region(template_grid_, p);
    fos.push_back(std::move(el));
  }
  return fos;
}

void BsplineTask::init_genotype(Rng& rng, Solution& sol) {
  // jitter scale follows the image voxel spacing: starts near the identity,
  // like the mesh model's point jitter
  const int d = template_grid_.ndims;
  sol.genotype.resize(variable_count());
  for (std::size_t p = 0; p < template_grid_.point_count(); ++p)
    for (int a = 0; a < d; ++a)
      sol.genotype[p * d + a] =
          rng.uniform(-0.3, 0.3) * problem_.target.geom.spacing[a];
}

void BsplineTask::full_evaluate(Solution& sol) {
  if (!sol.grid_state) sol.grid_state = template_grid_;
  sol.grid_state->unpack(sol.genotype);
  const ObjectiveParts parts = partial_contribution(
      *sol.grid_state, whole_lattice_region(*sol.grid_state), problem_.source,
      problem_.target, problem_.samples.points, buckets_);
  sol.ssd_sum = parts.ssd_sum;
  sol.mag_sum = parts.bend_sum;
  const double n = static_cast<double>(problem_.samples.points.size());
  sol.objectives = {parts.ssd_sum / n, parts.bend_sum / n};
  sol.feasible = true;
  sol.violation = 0.0;
  if (!sol.objectives.finite())
    throw EvalError("non-finite B-spline objective value");
}

bool BsplineTask::try_element(Solution& sol, const FosElement& element,
                              const std::vector<double>& values,
                              ElementBackup& backup) {
  BSplineGrid& grid = *sol.grid_state;
  const int d = grid.ndims;

  backup.old_values.resize(element.variables.size());
  for (std::size_t v = 0; v < element.variables.size(); ++v)
    backup.old_values[v] = sol.genotype[element.variables[v]];
  backup.old_objectives = sol.objectives;
  backup.old_feasible = sol.feasible;
  backup.old_violation = sol.violation;
  backup.old_ssd_sum = sol.ssd_sum;
  backup.old_mag_sum = sol.mag_sum;
  backup.old_assignments.clear();

  const ObjectiveParts old_parts =
      partial_contribution(grid, element.region, problem_.source,
                           problem_.target, problem_.samples.points, buckets_);

  for (std::size_t v = 0; v < element.variables.size(); ++v) {
    const int var = element.variables[v];
    sol.genotype[var] = values[v];
    grid.coefficients[var / d][var % d] = values[v];
  }

  const ObjectiveParts new_parts =
      partial_contribution(grid, element.region, problem_.source,
                           problem_.target, problem_.samples.points, buckets_);

  sol.ssd_sum += new_parts.ssd_sum - old_parts.ssd_sum;
  sol.mag_sum += new_parts.bend_sum - old_parts.bend_sum;
  const double n = static_cast<double>(problem_.samples.points.size());
  sol.objectives = {sol.ssd_sum / n, sol.mag_sum / n};
  return true;
}

void BsplineTask::revert_element(Solution& sol, const FosElement& element,
                                 const ElementBackup& backup) {
  BSplineGrid& grid = *sol.grid_state;
  const int d = grid.ndims;
  for (std::size_t v = 0; v < element.variables.size(); ++v) {
    const int var = element.variables[v];
    sol.genotype[var] = backup.old_values[v];
    grid.coefficients[var / d][var % d] = backup.old_values[v];
  }
  sol.objectives = backup.old_objectives;
  sol.feasible = backup.old_feasible;
  sol.violation = backup.old_violation;
  sol.ssd_sum = backup.old_ssd_sum;
  sol.mag_sum = backup.old_mag_sum;
}

// ---------------------------------------------------------------------------
// MeshTask
// ---------------------------------------------------------------------------

MeshTask::MeshTask(const RegistrationProblem& problem)
    : problem_(problem), template_mesh_(problem.mesh_template()) {
  double total = 0.0;
  for (const auto& [a, b] : template_mesh_.edges)
    total += (template_mesh_.target_points[a] - template_mesh_.target_points[b])
                 .norm();
  if (!template_mesh_.edges.empty())
    mean_edge_length_ = total / template_mesh_.edges.size();
  in_star_.assign(template_mesh_.simplices.size(), 0);
}

std::size_t MeshTask::variable_count() const {
  return template_mesh_.variable_count();
}

std::vector<FosElement> MeshTask::build_fos() const {
  const DualMesh& mesh = template_mesh_;
  const int d = mesh.ndims;
  const int n = mesh.n_variable;
  const std::size_t half = static_cast<std::size_t>(n) * d;

  // candidate edges between variable points
  std::vector<std::pair<int, int>> candidates;
  for (const auto& [a, b] : mesh.edges)
    if (a < n && b < n) candidates.push_back({a, b});

  // greedy edge cover: repeatedly take the edge covering the most uncovered
  // points (ties to the lexicographically first edge)
  std::vector<bool> covered(n, false);
  std::vector<std::pair<int, int>> chosen;
  int uncovered = n;
  while (uncovered > 0) {
    int best = -1, best_gain = 0;
    for (std::size_t e = 0; e < candidates.size(); ++e) {
      const int gain = (covered[candidates[e].first] ? 0 : 1) +
                       (covered[candidates[e].second] ? 0 : 1);
      if (gain > best_gain) {
        best_gain = gain;
        best = static_cast<int>(e);
      }
    }
    if (best < 0) break;  // no candidate edge covers anything new
    const auto [a, b] = candidates[best];
    chosen.push_back({a, b});
    if (!covered[a]) {
      covered[a] = true;
      --uncovered;
    }
    if (!covered[b]) {
      covered[b] = true;
      --uncovered;
    }
  }
  // variable points whose simplex neighbors are all frame points: pair with
  // the nearest variable point so every element keeps 2 points
  for (int p = 0; p < n; ++p) {
    if (covered[p]) continue;
    int nearest = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int q = 0; q < n; ++q) {
      if (q == p) continue;
      const double d2 =
          (mesh.target_points[p] - mesh.target_points[q]).norm2();
      if (d2 < best_d) {
        best_d = d2;
        nearest = q;
      }
    }
    chosen.push_back({std::min(p, nearest), std::max(p, nearest)});
    covered[p] = true;
  }

  std::vector<FosElement> fos;
  fos.reserve(chosen.size());
  for (const auto& [a, b] : chosen) {
    FosElement el;
    el.mesh_points = {a, b};
    el.variables.reserve(4 * d);
    for (int p : {a, b})
      for (int ax = 0; ax < d; ++ax) el.variables.push_back(p * d + ax);
    for (int p : {a, b})
      for (int ax = 0; ax < d; ++ax)
        el.variables.push_back(static_cast<int>(half) + p * d + ax);
    std::vector<int> star = mesh.incident[a];
    star.insert(star.end(), mesh.incident[b].begin(), mesh.incident[b].end());
    std::sort(star.begin(), star.end());
    star.erase(std::unique(star.begin(), star.end()), star.end());
    el.simplex_set = std::move(star);
    fos.push_back(std::move(el));
  }
  return fos;
}

void MeshTask::init_genotype(Rng& rng, Solution& sol) {
  const DualMesh& mesh = template_mesh_;
  const int d = mesh.ndims;
  const double amp = 0.05 * mean_edge_length_;
  DualMesh jittered = mesh;
  for (int attempt = 0; attempt < 200; ++attempt) {
    for (int p = 0; p < mesh.n_variable; ++p)
      for (int a = 0; a < d; ++a) {
        jittered.target_points[p][a] =
            mesh.target_points[p][a] + rng.uniform(-amp, amp);
        jittered.source_points[p][a] =
            mesh.source_points[p][a] + rng.uniform(-amp, amp);
      }
    if (is_fold_free(jittered)) {
      sol.genotype = jittered.pack();
      return;
    }
  }
  // fall back to the identity mesh, always fold-free
  sol.genotype = mesh.pack();
}

void MeshTask::full_evaluate(Solution& sol) {
  if (!sol.mesh_state) sol.mesh_state = template_mesh_;
  DualMesh& mesh = *sol.mesh_state;
  mesh.unpack(sol.genotype);

  sol.feasible = is_fold_free(mesh);
  if (!sol.feasible) {
    sol.violation = fold_violation_count(mesh);
    sol.objectives = {0.0, 0.0};
    sol.ssd_sum = 0.0;
    sol.mag_sum = 0.0;
    return;
  }
  sol.violation = 0.0;

  const MeshLocator locator(mesh);
  const std::size_t n_samples = problem_.samples.points.size();
  sol.sample_simplex.resize(n_samples);
  double ssd_sum = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const WorldPoint& p = problem_.samples.points[i];
    const BarycentricLocation loc = locator.locate_or_nearest(p);
    sol.sample_simplex[i] = loc.simplex;
    const double diff = interpolate(problem_.target, p) -
                        interpolate(problem_.source, apply_location(mesh, loc));
    ssd_sum += diff * diff;
  }
  double edge_sum = 0.0;
  for (std::size_t s = 0; s < mesh.simplices.size(); ++s)
    edge_sum += simplex_edge_term(mesh, static_cast<int>(s));

  sol.ssd_sum = ssd_sum;
  sol.mag_sum = edge_sum;
  const double denom = static_cast<double>(edge_pairs_per_simplex(mesh.ndims)) *
                       mesh.simplices.size();
  sol.objectives = {ssd_sum / n_samples, edge_sum / denom};
  if (!sol.objectives.finite())
    throw EvalError("non-finite mesh objective value");
}

void MeshTask::apply_values(Solution& sol, const FosElement& element,
                            const std::vector<double>& values) const {
  DualMesh& mesh = *sol.mesh_state;
  const int d = mesh.ndims;
  const std::size_t half = static_cast<std::size_t>(mesh.n_variable) * d;
  for (std::size_t v = 0; v < element.variables.size(); ++v) {
    const std::size_t var = element.variables[v];
    sol.genotype[var] = values[v];
    if (var < half)
      mesh.target_points[var / d][var % d] = values[v];
    else
      mesh.source_points[(var - half) / d][(var - half) % d] = values[v];
  }
}

double MeshTask::star_ssd(const Solution& sol) const {
  const DualMesh& mesh = *sol.mesh_state;
  double sum = 0.0;
  for (std::size_t i = 0; i < sol.sample_simplex.size(); ++i) {
    if (!in_star_[sol.sample_simplex[i]]) continue;
    const WorldPoint& p = problem_.samples.points[i];
    const BarycentricLocation loc =
        barycentric_in(mesh, sol.sample_simplex[i], p);
    const double diff = interpolate(problem_.target, p) -
                        interpolate(problem_.source, apply_location(mesh, loc));
    sum += diff * diff;
  }
  return sum;
}

double MeshTask::star_edge_sum(const Solution& sol,
                               const std::vector<int>& star) const {
  const DualMesh& mesh = *sol.mesh_state;
  double sum = 0.0;
  for (int s : star) sum += simplex_edge_term(mesh, s);
  return sum;
}

bool MeshTask::try_element(Solution& sol, const FosElement& element,
                           const std::vector<double>& values,
                           ElementBackup& backup) {
  DualMesh& mesh = *sol.mesh_state;
  const std::vector<int>& star = element.simplex_set;

  backup.old_values.resize(element.variables.size());
  for (std::size_t v = 0; v < element.variables.size(); ++v)
    backup.old_values[v] = sol.genotype[element.variables[v]];
  backup.old_objectives = sol.objectives;
  backup.old_feasible = sol.feasible;
  backup.old_violation = sol.violation;
  backup.old_ssd_sum = sol.ssd_sum;
  backup.old_mag_sum = sol.mag_sum;
  backup.old_assignments.clear();

  for (int s : star) in_star_[s] = 1;

  // contributions with the old coordinates
  const double old_ssd = star_ssd(sol);
  const double old_edges = star_edge_sum(sol, star);

  apply_values(sol, element, values);

  // fold check restricted to the simplices that actually moved
  for (int s : star) {
    if (!simplex_fold_free(mesh, s)) {
      apply_values(sol, element, backup.old_values);
      for (int s2 : star) in_star_[s2] = 0;
      return false;
    }
  }

  // relocate the affected samples within the star: the moved region is
  // exactly the union of the star simplices, whose boundary is fixed
  for (std::size_t i = 0; i < sol.sample_simplex.size(); ++i) {
    if (!in_star_[sol.sample_simplex[i]]) continue;
    const WorldPoint& p = problem_.samples.points[i];
    int found = -1;
    double best_min_coord = -std::numeric_limits<double>::infinity();
    int best = sol.sample_simplex[i];
    for (int s : star) {
      const BarycentricLocation loc = barycentric_in(mesh, s, p);
      double min_coord = loc.coords[0];
      for (int q = 1; q <= mesh.ndims; ++q)
        min_coord = std::min(min_coord, loc.coords[q]);
      if (min_coord >= -1e-9) {
        found = s;
        break;  // star is index-sorted: lowest-index containing simplex
      }
      if (min_coord > best_min_coord) {
        best_min_coord = min_coord;
        best = s;
      }
    }
    const int new_simplex = found >= 0 ? found : best;
    if (new_simplex != sol.sample_simplex[i]) {
      backup.old_assignments.push_back(
          {static_cast<int>(i), sol.sample_simplex[i]});
      sol.sample_simplex[i] = new_simplex;
    }
  }

  const double new_ssd = star_ssd(sol);
  const double new_edges = star_edge_sum(sol, star);
  for (int s : star) in_star_[s] = 0;

  sol.ssd_sum += new_ssd - old_ssd;
  sol.mag_sum += new_edges - old_edges;
  const double n = static_cast<double>(problem_.samples.points.size());
  const double denom = static_cast<double>(edge_pairs_per_simplex(mesh.ndims)) *
                       mesh.simplices.size();
  sol.objectives = {sol.ssd_sum / n, sol.mag_sum / denom};
  return true;
}

void MeshTask::revert_element(Solution& sol, const FosElement& element,
                              const ElementBackup& backup) {
  apply_values(sol, element, backup.old_values);
  for (const auto& [sample, simplex] : backup.old_assignments)
    sol.sample_simplex[sample] = simplex;
  sol.objectives = backup.old_objectives;
  sol.feasible = backup.old_feasible;
  sol.violation = backup.old_violation;
  sol.ssd_sum = backup.old_ssd_sum;
  sol.mag_sum = backup.old_mag_sum;
}

}  // namespace dirw
