#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "icpns/dataset.hpp"
#include "icpns/encoder.hpp"
#include "icpns/ingest.hpp"

namespace icpns {

// Items ranked by score descending, score ties broken by ascending item
// index. Excluded items (the user's training/validation positives) never
// appear. Throws no_candidate when everything is excluded.
std::vector<std::int32_t> rank_items(const ScoreView& model, std::int32_t u,
                                     const std::vector<char>& excluded);

struct MetricValues {
  double recall = 0.0;
  double ndcg = 0.0;
  double mrr = 0.0;
  double precision = 0.0;
};

// Top-k metrics for one ranked list against a sorted relevant set.
MetricValues ranking_metrics(std::span<const std::int32_t> ranked,
                             std::span<const std::int32_t> relevant, int k);

struct PerUserMetrics {
  std::int32_t user = 0;
  MetricValues values;
};

struct MetricReport {
  int k = 0;
  std::int64_t n_users = 0;  // users that entered the average
  double recall = 0.0;
  double ndcg = 0.0;
  double mrr = 0.0;
  double precision = 0.0;
  std::vector<PerUserMetrics> per_user;  // only when requested
};

// Mean metrics over users with at least one relevant item in `split`.
// Items in any exclusion split are removed from the candidate set (and a
// user's relevant items that got excluded do not count as reachable).
MetricReport evaluate_ranking(const ScoreView& model, const Interactions& split,
                              std::span<const Interactions* const> exclusions, int k,
                              bool keep_per_user = false);

// Eq-style holdout hit rate: mean over logged users of |N_u ∩ S_u| / k where
// N_u is the user's recently sampled negative set and S_u the validation
// positives.
double holdout_hit(const std::vector<std::pair<std::int32_t, std::vector<std::int32_t>>>& sampled,
                   const Interactions& val, int k);

// Mean sigmoid of model scores over sampled (user, negative) pairs; the
// fraction-of-hard-negatives proxy.
double hardness(const ScoreView& model, std::span<const std::pair<std::int32_t, std::int32_t>> pairs);

struct ClusterQuality {
  double silhouette = 0.0;
  double calinski_harabasz = 0.0;
};

// Mean silhouette coefficient and Calinski-Harabasz index of a clustering.
// Requires at least two non-empty clusters. Singleton points get silhouette 0.
ClusterQuality clustering_quality(const double* points, std::int32_t n, int dim,
                                  std::span<const std::int32_t> assignment);

// Fraction of sampled (user, negative) pairs the user was actually exposed to
// (synthetic data only, where exposure ground truth exists).
double exposure_realness(std::span<const std::pair<std::int32_t, std::int32_t>> pairs,
                         const ExposureLog& log);

}  // namespace icpns
