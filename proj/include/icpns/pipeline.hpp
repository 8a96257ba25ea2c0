#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "icpns/community.hpp"
#include "icpns/config.hpp"
#include "icpns/dataset.hpp"
#include "icpns/encoder.hpp"
#include "icpns/ingest.hpp"
#include "icpns/metrics.hpp"
#include "icpns/sampler.hpp"
#include "json.hpp"

namespace icpns {

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;      // mean softplus ranking loss over the epoch
  double neg_sigma = 0.0;      // mean sigmoid(score) of sampled negatives
  double wall_sec = 0.0;
  bool evaluated = false;
  double val_ndcg = 0.0;
  bool is_best = false;
};

struct StageResult {
  EmbeddingState state;  // stage 1: final epoch; stage 2: best validation
  std::vector<EpochRecord> trace;
  int epochs_run = 0;
  int best_epoch = 0;
  double best_val_ndcg = 0.0;
  double mean_epoch_sec = 0.0;
  SamplerStats sampler_stats;
  // negatives drawn during the last completed epoch, for hardness/realness
  std::vector<std::pair<std::int32_t, std::int32_t>> last_epoch_negatives;
  // per-user most recently sampled distinct negatives (capped at eval.k)
  std::vector<std::pair<std::int32_t, std::vector<std::int32_t>>> recent_negatives;
};

// Stage 1: warm-up training with the stage-1 strategy for a fixed epoch
// budget; validation NDCG is monitored every stage1_eval_every epochs. The
// returned state is the final epoch (the shared warm start for every stage-2
// strategy).
StageResult pretrain(const RunConfig& cfg, const DatasetBundle& data,
                     std::ostream* negatives_log = nullptr);

// Stage 2: fine-tune from a checkpoint under `spec`, evaluating every epoch
// and early-stopping after `patience` consecutive non-improving epochs
// (patience 0 stops at the first). Adam state starts fresh; community
// assignments stay frozen. Returns the best-validation state, which can be
// the unmodified checkpoint.
StageResult finetune(const RunConfig& cfg, const SamplerSpec& spec,
                     const DatasetBundle& data, const EmbeddingState& checkpoint,
                     const CommunityModel& communities,
                     std::ostream* negatives_log = nullptr);

// The user-side representation handed to clustering: base embeddings for mf,
// propagated final embeddings for lightgcn.
std::vector<double> clustering_points(const RunConfig& cfg, const DatasetBundle& data,
                                      const EmbeddingState& state);

struct ExperimentReport {
  nlohmann::json document;
  // convenience handles into the document
  double test_ndcg(const std::string& strategy) const;
  double test_recall(const std::string& strategy) const;
};

// Full two-stage experiment for the configured stage-2 strategy. Writes the
// run directory: config.resolved, stage1.ckpt, community.model,
// stage2.best.ckpt, trace.csv, negatives.log (opt), report.json, metrics.csv.
ExperimentReport run_experiment(const RunConfig& cfg);

// Shared stage 1 + community model, then one fine-tune per strategy in
// <out>/<strategy>/. The top-level report holds the comparison grid.
ExperimentReport compare_strategies(const RunConfig& cfg, const std::vector<SamplerSpec>& specs);

// Loads the bundle named by the config, ingesting raw data in place when the
// format is not "bundle". Returns the exposure log when one sits next to the
// bundle.
std::pair<DatasetBundle, std::optional<ExposureLog>> load_dataset(const RunConfig& cfg);

}  // namespace icpns
