#include "icpns/sampler.hpp"

#include <algorithm>

#include "icpns/errors.hpp"

namespace icpns {

Strategy parse_strategy(const std::string& name) {
  if (name == "rns") return Strategy::rns;
  if (name == "pns") return Strategy::pns;
  if (name == "hns") return Strategy::hns;
  if (name == "icpns") return Strategy::icpns;
  fail(ErrorCategory::config, "unknown sampling strategy '" + name + "'");
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::rns: return "rns";
    case Strategy::pns: return "pns";
    case Strategy::hns: return "hns";
    case Strategy::icpns: return "icpns";
  }
  return "?";
}

std::int32_t sample_rns(std::int32_t u, const Interactions& train, Rng& rng, int retry_cap,
                        SamplerStats* stats) {
  std::int64_t admissible = static_cast<std::int64_t>(train.n_items()) - train.degree(u);
  if (admissible <= 0)
    fail(ErrorCategory::no_candidate,
         "user " + std::to_string(u) + " has interacted with every item");
  if (stats) ++stats->draws;
  for (int t = 0; t < retry_cap; ++t) {
    std::int32_t i = static_cast<std::int32_t>(rng.below(static_cast<std::uint32_t>(train.n_items())));
    if (!train.has(u, i)) return i;
    if (stats) ++stats->rejections;
  }
  // exact fallback: index the admissible set directly
  if (stats) ++stats->exact_fallbacks;
  std::int64_t r = rng.below(static_cast<std::uint32_t>(admissible));
  auto row = train.items(u);
  std::size_t k = 0;
  for (std::int32_t i = 0; i < train.n_items(); ++i) {
    if (k < row.size() && row[k] == i) {
      ++k;
      continue;
    }
    if (r-- == 0) return i;
  }
  fail(ErrorCategory::no_candidate, "exhausted admissible items unexpectedly");
}

CompactAlias build_global_table(const Interactions& train, double alpha) {
  auto counts = train.item_counts();
  return build_compact_alias(smooth_popularity(counts, alpha));
}

namespace {

// Shared weighted-draw core for the global and per-community tables:
// rejection against I_u+, then an exact renormalized draw over the table's
// admissible support. Returns -1 when the table holds no admissible mass.
std::int32_t draw_weighted(std::int32_t u, const CompactAlias& table, const Interactions& train,
                           Rng& rng, int retry_cap, SamplerStats* stats) {
  if (!table.has_mass()) return -1;
  for (int t = 0; t < retry_cap; ++t) {
    std::int32_t i = table.draw(rng);
    if (!train.has(u, i)) return i;
    if (stats) ++stats->rejections;
  }
  if (stats) ++stats->exact_fallbacks;
  double total = 0.0;
  for (std::size_t k = 0; k < table.items.size(); ++k)
    if (!train.has(u, table.items[k])) total += table.weights[k];
  if (total <= 0.0) return -1;
  double r = rng.real() * total;
  double acc = 0.0;
  std::int32_t last = -1;
  for (std::size_t k = 0; k < table.items.size(); ++k) {
    if (train.has(u, table.items[k])) continue;
    last = table.items[k];
    acc += table.weights[k];
    if (r < acc) return last;
  }
  return last;  // guards the r == total rounding edge
}

}  // namespace

std::int32_t sample_pns(std::int32_t u, const CompactAlias& table, const Interactions& train,
                        Rng& rng, int retry_cap, SamplerStats* stats) {
  if (stats) ++stats->draws;
  std::int32_t i = draw_weighted(u, table, train, rng, retry_cap, stats);
  if (i >= 0) return i;
  if (stats) ++stats->rns_fallbacks;
  return sample_rns(u, train, rng, retry_cap);
}

std::int32_t sample_hns(std::int32_t u, const ScoreView& model, const Interactions& train,
                        int candidates, Rng& rng, int retry_cap, SamplerStats* stats) {
  std::int64_t admissible = static_cast<std::int64_t>(train.n_items()) - train.degree(u);
  if (admissible <= 0)
    fail(ErrorCategory::no_candidate,
         "user " + std::to_string(u) + " has interacted with every item");
  std::int64_t pool = std::min<std::int64_t>(candidates, admissible);
  if (stats) ++stats->draws;
  std::int32_t best = -1;
  double best_score = 0.0;
  for (std::int64_t t = 0; t < pool; ++t) {
    std::int32_t i = sample_rns(u, train, rng, retry_cap);
    double s = model(u, i);
    if (best < 0 || s > best_score || (s == best_score && i < best)) {
      best = i;
      best_score = s;
    }
  }
  return best;
}

std::int32_t sample_icpns(std::int32_t u, const CommunityModel& model,
                          const Interactions& train, Rng& rng, int retry_cap,
                          SamplerStats* stats) {
  if (u < 0 || static_cast<std::size_t>(u) >= model.assignment.size())
    fail(ErrorCategory::validation, "user " + std::to_string(u) + " missing from community model");
  if (stats) ++stats->draws;
  const CompactAlias& table = model.tables[model.assignment[u]];
  std::int32_t i = draw_weighted(u, table, train, rng, retry_cap, stats);
  if (i >= 0) return i;
  if (stats) ++stats->rns_fallbacks;
  return sample_rns(u, train, rng, retry_cap);
}

}  // namespace icpns
