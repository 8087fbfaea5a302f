#include "dirw/archive.hpp"

#include <algorithm>
#include <cmath>

namespace dirw {

long long ElitistArchive::cell_index(double value, double cell) const {
  return static_cast<long long>(std::floor(value / cell));
}

bool ElitistArchive::insert_filtered(Entry entry) {
  const ObjectiveVector& obj = entry.objectives;
  for (const Entry& m : entries_) {
    // strict domination or an exact duplicate
    if (dominates(m.objectives, obj)) return false;
    if (m.objectives.similarity == obj.similarity &&
        m.objectives.magnitude == obj.magnitude)
      return false;
    // an incumbent keeps its grid cell unless the candidate dominates it
    if (cell_[0] > 0.0 && !dominates(obj, m.objectives) &&
        cell_index(m.objectives.similarity, cell_[0]) ==
            cell_index(obj.similarity, cell_[0]) &&
        cell_index(m.objectives.magnitude, cell_[1]) ==
            cell_index(obj.magnitude, cell_[1]))
      return false;
  }
  std::erase_if(entries_,
                [&](const Entry& m) { return dominates(obj, m.objectives); });
  entries_.push_back(std::move(entry));
  return true;
}

bool ElitistArchive::insert(const ObjectiveVector& obj,
                            const std::vector<double>& genotype,
                            const std::vector<double>& payload) {
  if (!obj.finite()) return false;
  Entry entry{genotype, obj, payload};
  if (!insert_filtered(std::move(entry))) return false;
  if (entries_.size() > capacity_ * 4 / 3) adapt_discretization();
  // a shrunken archive gets a finer grid so it can refill
  if (cell_[0] > 0.0 && entries_.size() < capacity_ / 2) {
    cell_[0] *= 0.5;
    cell_[1] *= 0.5;
  }
  return true;
}

void ElitistArchive::adapt_discretization() {
  const std::size_t upper = capacity_ * 4 / 3;
  const std::size_t lower = capacity_ / 2;

  double lo[2], hi[2];
  lo[0] = hi[0] = entries_[0].objectives.similarity;
  lo[1] = hi[1] = entries_[0].objectives.magnitude;
  for (const Entry& m : entries_) {
    lo[0] = std::min(lo[0], m.objectives.similarity);
    hi[0] = std::max(hi[0], m.objectives.similarity);
    lo[1] = std::min(lo[1], m.objectives.magnitude);
    hi[1] = std::max(hi[1], m.objectives.magnitude);
  }
  double range[2];
  for (int j = 0; j < 2; ++j)
    range[j] = std::max(hi[j] - lo[j], 1e-300);

  const std::vector<Entry> snapshot = std::move(entries_);

  // binary search the grid resolution: more cells keep more members
  long long na = 1, nb = 1LL << 25;
  double best_cell[2] = {range[0], range[1]};
  std::size_t best_size = 0;
  for (int it = 0; it < 30 && na <= nb; ++it) {
    const long long nc = na + (nb - na) / 2;
    cell_[0] = range[0] / static_cast<double>(nc);
    cell_[1] = range[1] / static_cast<double>(nc);
    entries_.clear();
    for (const Entry& m : snapshot) insert_filtered(m);
    if (entries_.size() > upper) {
      nb = nc - 1;
    } else {
      if (entries_.size() > best_size) {
        best_size = entries_.size();
        best_cell[0] = cell_[0];
        best_cell[1] = cell_[1];
      }
      if (entries_.size() >= lower) break;
      na = nc + 1;
    }
  }
  if (entries_.size() > upper || entries_.size() < best_size) {
    cell_[0] = best_cell[0];
    cell_[1] = best_cell[1];
    entries_.clear();
    for (const Entry& m : snapshot) insert_filtered(m);
  }
}

}  // namespace dirw
