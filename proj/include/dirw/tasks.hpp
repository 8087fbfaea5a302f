#pragma once

#include "dirw/gomea.hpp"

namespace dirw {

// Direct multi-objective B-spline optimization: one FOS element per control
// point (the d coefficients move together), partial evaluation over the
// affected patch region.
class BsplineTask : public OptimizationTask {
public:
  explicit BsplineTask(const RegistrationProblem& problem);

  std::size_t variable_count() const override;
  std::vector<FosElement> build_fos() const override;
  void init_genotype(Rng& rng, Solution& sol) override;
  void full_evaluate(Solution& sol) override;
  bool try_element(Solution& sol, const FosElement& element,
                   const std::vector<double>& values,
                   ElementBackup& backup) override;
  void revert_element(Solution& sol, const FosElement& element,
                      const ElementBackup& backup) override;
  std::vector<double> reference_genotype() const override {
    return std::vector<double>(variable_count(), 0.0);
  }

private:
  const RegistrationProblem& problem_;
  BSplineGrid template_grid_;
  CellBuckets buckets_;
};

// Dual-dynamic mesh optimization: FOS elements from a greedy edge cover of
// the target mesh graph; each element moves both endpoints in both meshes.
// Partial evaluation over the star of the moved points; fold-inducing moves
// are rejected outright.
class MeshTask : public OptimizationTask {
public:
  explicit MeshTask(const RegistrationProblem& problem);

  std::size_t variable_count() const override;
  std::vector<FosElement> build_fos() const override;
  void init_genotype(Rng& rng, Solution& sol) override;
  void full_evaluate(Solution& sol) override;
  bool try_element(Solution& sol, const FosElement& element,
                   const std::vector<double>& values,
                   ElementBackup& backup) override;
  void revert_element(Solution& sol, const FosElement& element,
                      const ElementBackup& backup) override;
  std::vector<double> reference_genotype() const override {
    return template_mesh_.pack();
  }

private:
  void apply_values(Solution& sol, const FosElement& element,
                    const std::vector<double>& values) const;
  double star_ssd(const Solution& sol) const;
  double star_edge_sum(const Solution& sol, const std::vector<int>& star) const;

  const RegistrationProblem& problem_;
  const DualMesh& template_mesh_;
  double mean_edge_length_{1.0};
  std::vector<char> in_star_;  // scratch simplex membership mask
};

}  // namespace dirw
