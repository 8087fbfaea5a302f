#pragma once

#include <vector>

#include "dirw/objectives.hpp"

namespace dirw {

// Objective-space-discretized store of non-dominated solutions. Only
// feasible solutions are offered. When the archive outgrows 4/3 of its
// target capacity, the objective-space grid is re-fit so the filtered size
// lands back inside [capacity/2, 4/3 capacity].
class ElitistArchive {
public:
  struct Entry {
    std::vector<double> genotype;
    ObjectiveVector objectives;
    std::vector<double> payload;  // e.g. baseline: registered grid coefficients
  };

  explicit ElitistArchive(std::size_t target_capacity)
      : capacity_(target_capacity) {}

  // true if the solution entered the archive
  bool insert(const ObjectiveVector& obj, const std::vector<double>& genotype,
              const std::vector<double>& payload = {});

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool discretization_active() const { return cell_[0] > 0.0; }

private:
  bool insert_filtered(Entry entry);
  void adapt_discretization();
  long long cell_index(double value, double cell) const;

  std::size_t capacity_;
  std::vector<Entry> entries_;
  double cell_[2]{0.0, 0.0};
};

}  // namespace dirw
