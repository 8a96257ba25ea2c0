#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "icpns/rng.hpp"

namespace icpns {

// Walker/Vose alias table: O(n) construction, O(1) draws (one uniform index
// plus one biased coin).
class AliasTable {
 public:
  AliasTable() = default;

  // weights must be non-negative with positive sum
  static AliasTable build(std::span<const double> weights);

  std::int32_t size() const { return n_; }
  double total_weight() const { return total_; }

  std::int32_t draw(Rng& rng) const {
    std::int32_t j = static_cast<std::int32_t>(rng.below(static_cast<std::uint32_t>(n_)));
    return rng.real() < prob_[j] ? j : alias_[j];
  }

  // implied probability of each outcome, reconstructed from the table cells;
  // matches weights / sum(weights) up to rounding
  std::vector<double> reconstructed() const;

  const std::vector<double>& cell_prob() const { return prob_; }
  const std::vector<std::int32_t>& cell_alias() const { return alias_; }

 private:
  std::int32_t n_ = 0;
  double total_ = 0.0;
  std::vector<double> prob_;
  std::vector<std::int32_t> alias_;
};

// Alias table over the positive-weight subset of a sparse weight vector.
// Draws return original item indices. Used for the per-community and global
// popularity tables so zero-mass items never occupy cells.
struct CompactAlias {
  std::vector<std::int32_t> items;   // original indices with weight > 0
  std::vector<double> weights;       // parallel to items
  AliasTable table;

  bool has_mass() const { return !items.empty(); }
  std::int32_t draw(Rng& rng) const { return items[table.draw(rng)]; }
};

CompactAlias build_compact_alias(std::span<const std::pair<std::int32_t, double>> weights);

}  // namespace icpns
