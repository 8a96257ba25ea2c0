#include "icpns/alias.hpp"

#include <cmath>

#include "icpns/errors.hpp"

namespace icpns {

AliasTable AliasTable::build(std::span<const double> weights) {
  AliasTable t;
  t.n_ = static_cast<std::int32_t>(weights.size());
  if (t.n_ == 0) fail(ErrorCategory::no_mass, "alias table over empty support");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      fail(ErrorCategory::numeric, "alias weights must be finite and non-negative");
    total += w;
  }
  if (total <= 0.0) fail(ErrorCategory::no_mass, "alias table needs positive total weight");
  t.total_ = total;

  std::size_t n = static_cast<std::size_t>(t.n_);
  std::vector<double> scaled(n);
  for (std::size_t j = 0; j < n; ++j) scaled[j] = weights[j] * static_cast<double>(n) / total;

  t.prob_.assign(n, 0.0);
  t.alias_.assign(n, 0);
  std::vector<std::int32_t> small, large;
  small.reserve(n);
  large.reserve(n);
  for (std::size_t j = 0; j < n; ++j)
    (scaled[j] < 1.0 ? small : large).push_back(static_cast<std::int32_t>(j));

  while (!small.empty() && !large.empty()) {
    std::int32_t s = small.back();
    small.pop_back();
    std::int32_t l = large.back();
    large.pop_back();
    t.prob_[s] = scaled[s];
    t.alias_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    (scaled[l] < 1.0 ? small : large).push_back(l);
  }
  for (std::int32_t j : large) {
    t.prob_[j] = 1.0;
    t.alias_[j] = j;
  }
  for (std::int32_t j : small) {  // only possible through rounding
    t.prob_[j] = 1.0;
    t.alias_[j] = j;
  }
  return t;
}

std::vector<double> AliasTable::reconstructed() const {
  std::size_t n = static_cast<std::size_t>(n_);
  std::vector<double> p(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    p[j] += prob_[j];
    p[static_cast<std::size_t>(alias_[j])] += 1.0 - prob_[j];
  }
  for (double& v : p) v /= static_cast<double>(n);
  return p;
}

CompactAlias build_compact_alias(std::span<const std::pair<std::int32_t, double>> weights) {
  CompactAlias out;
  for (const auto& [item, w] : weights) {
    if (w > 0.0) {
      out.items.push_back(item);
      out.weights.push_back(w);
    }
  }
  if (!out.items.empty()) out.table = AliasTable::build(out.weights);
  return out;
}

}  // namespace icpns
