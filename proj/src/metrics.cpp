#include "icpns/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "icpns/errors.hpp"

namespace icpns {

std::vector<std::int32_t> rank_items(const ScoreView& model, std::int32_t u,
                                     const std::vector<char>& excluded) {
  std::vector<std::pair<double, std::int32_t>> scored;
  scored.reserve(static_cast<std::size_t>(model.n_items));
  for (std::int32_t i = 0; i < model.n_items; ++i) {
    if (!excluded.empty() && excluded[static_cast<std::size_t>(i)]) continue;
    scored.emplace_back(model(u, i), i);
  }
  if (scored.empty())
    fail(ErrorCategory::no_candidate, "no rankable items for user " + std::to_string(u));
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::int32_t> out;
  out.reserve(scored.size());
  for (const auto& [s, i] : scored) out.push_back(i);
  return out;
}

MetricValues ranking_metrics(std::span<const std::int32_t> ranked,
                             std::span<const std::int32_t> relevant, int k) {
  if (k < 1) fail(ErrorCategory::config, "k must be positive");
  MetricValues m;
  if (relevant.empty()) return m;
  int depth = std::min<int>(k, static_cast<int>(ranked.size()));
  int hits = 0;
  double dcg = 0.0;
  int first_hit = 0;
  for (int pos = 1; pos <= depth; ++pos) {
    if (std::binary_search(relevant.begin(), relevant.end(), ranked[pos - 1])) {
      ++hits;
      dcg += 1.0 / std::log2(static_cast<double>(pos) + 1.0);
      if (first_hit == 0) first_hit = pos;
    }
  }
  int ideal = std::min<int>(k, static_cast<int>(relevant.size()));
  double idcg = 0.0;
  for (int pos = 1; pos <= ideal; ++pos) idcg += 1.0 / std::log2(static_cast<double>(pos) + 1.0);
  m.recall = static_cast<double>(hits) / static_cast<double>(relevant.size());
  m.ndcg = idcg > 0.0 ? dcg / idcg : 0.0;
  m.mrr = first_hit > 0 ? 1.0 / static_cast<double>(first_hit) : 0.0;
  m.precision = static_cast<double>(hits) / static_cast<double>(k);
  return m;
}

MetricReport evaluate_ranking(const ScoreView& model, const Interactions& split,
                              std::span<const Interactions* const> exclusions, int k,
                              bool keep_per_user) {
  MetricReport report;
  report.k = k;
  std::vector<char> excluded(static_cast<std::size_t>(model.n_items), 0);
  std::vector<std::int32_t> relevant;
  for (std::int32_t u = 0; u < split.n_users(); ++u) {
    auto rel_row = split.items(u);
    if (rel_row.empty()) continue;
    std::fill(excluded.begin(), excluded.end(), 0);
    for (const Interactions* ex : exclusions)
      for (std::int32_t i : ex->items(u)) excluded[static_cast<std::size_t>(i)] = 1;
    relevant.clear();
    for (std::int32_t i : rel_row)
      if (!excluded[static_cast<std::size_t>(i)]) relevant.push_back(i);
    if (relevant.empty()) continue;  // every relevant item was excluded
    auto ranked = rank_items(model, u, excluded);
    MetricValues v = ranking_metrics(ranked, relevant, k);
    report.recall += v.recall;
    report.ndcg += v.ndcg;
    report.mrr += v.mrr;
    report.precision += v.precision;
    ++report.n_users;
    if (keep_per_user) report.per_user.push_back({u, v});
  }
  if (report.n_users > 0) {
    double n = static_cast<double>(report.n_users);
    report.recall /= n;
    report.ndcg /= n;
    report.mrr /= n;
    report.precision /= n;
  }
  return report;
}

double holdout_hit(const std::vector<std::pair<std::int32_t, std::vector<std::int32_t>>>& sampled,
                   const Interactions& val, int k) {
  if (k < 1) fail(ErrorCategory::config, "k must be positive");
  if (sampled.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& [u, negs] : sampled) {
    std::int64_t inter = 0;
    for (std::int32_t i : negs)
      if (u >= 0 && u < val.n_users() && val.has(u, i)) ++inter;
    acc += static_cast<double>(inter) / static_cast<double>(k);
  }
  return acc / static_cast<double>(sampled.size());
}

double hardness(const ScoreView& model,
                std::span<const std::pair<std::int32_t, std::int32_t>> pairs) {
  if (pairs.empty()) fail(ErrorCategory::state, "hardness over an empty sample");
  double acc = 0.0;
  for (const auto& [u, i] : pairs) {
    double s = model(u, i);
    acc += s >= 0.0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s));
  }
  return acc / static_cast<double>(pairs.size());
}

ClusterQuality clustering_quality(const double* points, std::int32_t n, int dim,
                                  std::span<const std::int32_t> assignment) {
  if (assignment.size() != static_cast<std::size_t>(n))
    fail(ErrorCategory::validation, "assignment length does not match point count");
  std::int32_t p = 0;
  for (std::int32_t c : assignment) p = std::max(p, c + 1);
  std::vector<std::int64_t> sizes(static_cast<std::size_t>(p), 0);
  for (std::int32_t c : assignment) {
    if (c < 0) fail(ErrorCategory::validation, "negative cluster label");
    ++sizes[static_cast<std::size_t>(c)];
  }
  std::int32_t nonempty = 0;
  for (auto s : sizes)
    if (s > 0) ++nonempty;
  if (nonempty < 2)
    fail(ErrorCategory::state, "cluster quality needs at least two non-empty clusters");

  auto sqd = [&](std::int32_t a, std::int32_t b) {
    const double* pa = points + static_cast<std::int64_t>(a) * dim;
    const double* pb = points + static_cast<std::int64_t>(b) * dim;
    double s = 0.0;
    for (int k = 0; k < dim; ++k) {
      double d = pa[k] - pb[k];
      s += d * d;
    }
    return s;
  };

  // silhouette: mean over points of (b - a) / max(a, b)
  double sil_acc = 0.0;
  std::vector<double> dist_sum(static_cast<std::size_t>(p));
  for (std::int32_t x = 0; x < n; ++x) {
    std::fill(dist_sum.begin(), dist_sum.end(), 0.0);
    for (std::int32_t y = 0; y < n; ++y) {
      if (y == x) continue;
      dist_sum[static_cast<std::size_t>(assignment[y])] += std::sqrt(sqd(x, y));
    }
    std::int32_t cx = assignment[x];
    if (sizes[static_cast<std::size_t>(cx)] <= 1) continue;  // singleton contributes 0
    double a = dist_sum[static_cast<std::size_t>(cx)] /
               static_cast<double>(sizes[static_cast<std::size_t>(cx)] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::int32_t c = 0; c < p; ++c) {
      if (c == cx || sizes[static_cast<std::size_t>(c)] == 0) continue;
      b = std::min(b, dist_sum[static_cast<std::size_t>(c)] /
                          static_cast<double>(sizes[static_cast<std::size_t>(c)]));
    }
    double denom = std::max(a, b);
    if (denom > 0.0) sil_acc += (b - a) / denom;
  }

  // Calinski-Harabasz: between/within dispersion ratio
  std::vector<double> centroid(static_cast<std::size_t>(p) * dim, 0.0);
  std::vector<double> global(static_cast<std::size_t>(dim), 0.0);
  for (std::int32_t x = 0; x < n; ++x) {
    const double* px = points + static_cast<std::int64_t>(x) * dim;
    double* c = centroid.data() + static_cast<std::int64_t>(assignment[x]) * dim;
    for (int k = 0; k < dim; ++k) {
      c[k] += px[k];
      global[static_cast<std::size_t>(k)] += px[k];
    }
  }
  for (std::int32_t c = 0; c < p; ++c)
    if (sizes[static_cast<std::size_t>(c)] > 0)
      for (int k = 0; k < dim; ++k)
        centroid[static_cast<std::int64_t>(c) * dim + k] /= static_cast<double>(sizes[static_cast<std::size_t>(c)]);
  for (int k = 0; k < dim; ++k) global[static_cast<std::size_t>(k)] /= static_cast<double>(n);

  double within = 0.0, between = 0.0;
  for (std::int32_t x = 0; x < n; ++x) {
    const double* px = points + static_cast<std::int64_t>(x) * dim;
    const double* c = centroid.data() + static_cast<std::int64_t>(assignment[x]) * dim;
    for (int k = 0; k < dim; ++k) {
      double d = px[k] - c[k];
      within += d * d;
    }
  }
  for (std::int32_t c = 0; c < p; ++c) {
    if (sizes[static_cast<std::size_t>(c)] == 0) continue;
    double d2 = 0.0;
    for (int k = 0; k < dim; ++k) {
      double d = centroid[static_cast<std::int64_t>(c) * dim + k] - global[static_cast<std::size_t>(k)];
      d2 += d * d;
    }
    between += static_cast<double>(sizes[static_cast<std::size_t>(c)]) * d2;
  }

  ClusterQuality q;
  q.silhouette = sil_acc / static_cast<double>(n);
  double denom = within * static_cast<double>(nonempty - 1);
  q.calinski_harabasz =
      denom > 0.0 ? (between * static_cast<double>(n - nonempty)) / denom : 0.0;
  return q;
}

double exposure_realness(std::span<const std::pair<std::int32_t, std::int32_t>> pairs,
                         const ExposureLog& log) {
  if (pairs.empty()) fail(ErrorCategory::state, "realness over an empty sample");
  std::int64_t hits = 0;
  for (const auto& [u, i] : pairs)
    if (log.was_exposed(u, i)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

}  // namespace icpns
