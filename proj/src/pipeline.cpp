#include "icpns/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>

#include "icpns/errors.hpp"
#include "icpns/report.hpp"
#include "icpns/rng.hpp"

namespace icpns {

namespace {

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Per-user window of the most recently sampled distinct negatives.
class RecentNegatives {
 public:
  RecentNegatives(std::int32_t n_users, int cap) : rows_(static_cast<std::size_t>(n_users)), cap_(cap) {}

  void add(std::int32_t u, std::int32_t i) {
    auto& row = rows_[static_cast<std::size_t>(u)];
    auto it = std::find(row.begin(), row.end(), i);
    if (it != row.end()) row.erase(it);
    row.push_back(i);
    if (static_cast<int>(row.size()) > cap_) row.erase(row.begin());
  }

  std::vector<std::pair<std::int32_t, std::vector<std::int32_t>>> snapshot() const {
    std::vector<std::pair<std::int32_t, std::vector<std::int32_t>>> out;
    for (std::size_t u = 0; u < rows_.size(); ++u)
      if (!rows_[u].empty()) out.emplace_back(static_cast<std::int32_t>(u), rows_[u]);
    return out;
  }

 private:
  std::vector<std::vector<std::int32_t>> rows_;
  int cap_;
};

struct StageContext {
  const RunConfig& cfg;
  const DatasetBundle& data;
  const SamplerSpec& spec;
  const CommunityModel* communities;  // icpns only
  int stage;                          // 1 or 2
  std::ostream* negatives_log;
};

// One training stage: mini-batch BPR with the requested negative sampler.
// Evaluation cadence and the returned state differ between the stages and
// are handled by the callers.
class StageTrainer {
 public:
  StageTrainer(const StageContext& ctx, EmbeddingState state)
      : ctx_(ctx),
        state_(std::move(state)),
        dim_(state_.dim),
        total_(static_cast<std::size_t>(state_.rows()) * static_cast<std::size_t>(state_.dim)),
        sample_rng_(Rng::derive(*ctx.cfg.sampler_seed, 0x100ULL * ctx.stage + 1)),
        shuffle_rng_(Rng::derive(*ctx.cfg.sampler_seed, 0x100ULL * ctx.stage + 2)),
        recent_(ctx.data.train.n_users(), ctx.cfg.eval_k) {
    const ModelConfig& m = ctx_.cfg.model;
    lightgcn_ = m.backbone == Backbone::lightgcn;
    alphas_ = m.alphas();
    if (lightgcn_) {
      graph_ = GraphOperator::build(ctx_.data.train);
      estar_.resize(total_);
    }
    positives_ = ctx_.data.train.to_pairs();
    grad_.resize(total_);
    if (lightgcn_) gstar_.resize(total_);
    if (ctx_.spec.strategy == Strategy::pns)
      global_table_ = build_global_table(ctx_.data.train, ctx_.spec.alpha);
  }

  const EmbeddingState& state() const { return state_; }
  EmbeddingState take_state() { return std::move(state_); }
  SamplerStats stats() const { return stats_; }
  std::vector<std::pair<std::int32_t, std::int32_t>> take_last_epoch_negatives() {
    return std::move(last_negs_);
  }
  std::vector<std::pair<std::int32_t, std::vector<std::int32_t>>> recent_snapshot() const {
    return recent_.snapshot();
  }

  // Final representations of the current state (shared buffer, valid until
  // the next epoch/eval call).
  ScoreView score_view() {
    refresh_estar();
    const double* base = lightgcn_ ? estar_.data() : state_.emb.data();
    return {base, base + static_cast<std::int64_t>(state_.n_users) * dim_, dim_,
            state_.n_users, state_.n_items};
  }

  double eval_val_ndcg() {
    ScoreView v = score_view();
    const Interactions* excl[] = {&ctx_.data.train};
    return evaluate_ranking(v, ctx_.data.val, excl, ctx_.cfg.eval_k).ndcg;
  }

  // Returns (mean ranking loss, mean sigmoid of negative scores).
  std::pair<double, double> run_epoch() {
    std::size_t n = positives_.size();
    if (n == 0) fail(ErrorCategory::state, "cannot train on an empty training split");
    shuffle_rng_.shuffle(positives_);
    last_negs_.clear();
    last_negs_.reserve(n);

    double loss_acc = 0.0, sigma_acc = 0.0;
    std::size_t batch = static_cast<std::size_t>(ctx_.cfg.batch_size);
    for (std::size_t begin = 0; begin < n; begin += batch) {
      std::size_t end = std::min(n, begin + batch);
      auto [l, s] = run_batch(begin, end);
      loss_acc += l;
      sigma_acc += s;
    }
    if (ctx_.negatives_log) {
      for (const auto& [u, i] : last_negs_) (*ctx_.negatives_log) << u << '\t' << i << '\n';
    }
    return {loss_acc / static_cast<double>(n), sigma_acc / static_cast<double>(n)};
  }

 private:
  void refresh_estar() {
    if (!lightgcn_) return;
    propagate(graph_, state_.emb.data(), dim_, ctx_.cfg.model.layers, alphas_, estar_.data(),
              scratch_);
  }

  std::int32_t draw_negative(std::int32_t u, const ScoreView& view) {
    switch (ctx_.spec.strategy) {
      case Strategy::rns:
        return sample_rns(u, ctx_.data.train, sample_rng_, ctx_.spec.retry_cap, &stats_);
      case Strategy::pns:
        return sample_pns(u, global_table_, ctx_.data.train, sample_rng_, ctx_.spec.retry_cap,
                          &stats_);
      case Strategy::hns:
        return sample_hns(u, view, ctx_.data.train, ctx_.spec.candidates, sample_rng_,
                          ctx_.spec.retry_cap, &stats_);
      case Strategy::icpns:
        if (!ctx_.communities)
          fail(ErrorCategory::state, "icpns sampling needs a community model");
        return sample_icpns(u, *ctx_.communities, ctx_.data.train, sample_rng_,
                            ctx_.spec.retry_cap, &stats_);
    }
    fail(ErrorCategory::state, "unreachable");
  }

  std::pair<double, double> run_batch(std::size_t begin, std::size_t end) {
    refresh_estar();
    const double* fin = lightgcn_ ? estar_.data() : state_.emb.data();
    ScoreView view{fin, fin + static_cast<std::int64_t>(state_.n_users) * dim_, dim_,
                   state_.n_users, state_.n_items};

    double* gacc = lightgcn_ ? gstar_.data() : grad_.data();
    std::memset(gacc, 0, total_ * sizeof(double));
    touched_.clear();

    double loss_acc = 0.0, sigma_acc = 0.0;
    std::int64_t nu = state_.n_users;
    for (std::size_t t = begin; t < end; ++t) {
      auto [u, ip] = positives_[t];
      std::int32_t in = draw_negative(u, view);
      last_negs_.emplace_back(u, in);
      recent_.add(u, in);

      const double* eu = fin + static_cast<std::int64_t>(u) * dim_;
      const double* ep = fin + (nu + ip) * dim_;
      const double* en = fin + (nu + in) * dim_;
      double d = 0.0, sneg = 0.0;
      for (int k = 0; k < dim_; ++k) {
        d += eu[k] * (ep[k] - en[k]);
        sneg += eu[k] * en[k];
      }
      loss_acc += std::max(-d, 0.0) + std::log1p(std::exp(-std::abs(d)));
      sigma_acc += sigmoid(sneg);
      double g = -sigmoid(-d);

      double* gu = gacc + static_cast<std::int64_t>(u) * dim_;
      double* gp = gacc + (nu + ip) * dim_;
      double* gn = gacc + (nu + in) * dim_;
      for (int k = 0; k < dim_; ++k) {
        gu[k] += g * (ep[k] - en[k]);
        gp[k] += g * eu[k];
        gn[k] -= g * eu[k];
      }
      touched_.push_back(u);
      touched_.push_back(nu + ip);
      touched_.push_back(nu + in);
    }

    if (lightgcn_) {
      // adjoint of propagation equals propagation (A_hat symmetric)
      propagate(graph_, gstar_.data(), dim_, ctx_.cfg.model.layers, alphas_, grad_.data(),
                scratch_);
    }

    // L2 pulls on the base rows of the batch triplets
    std::sort(touched_.begin(), touched_.end());
    touched_.erase(std::unique(touched_.begin(), touched_.end()), touched_.end());
    double l2 = ctx_.cfg.model.l2;
    if (l2 > 0.0) {
      for (std::int64_t r : touched_) {
        double* gr = grad_.data() + r * dim_;
        const double* er = state_.emb.data() + r * dim_;
        for (int k = 0; k < dim_; ++k) gr[k] += 2.0 * l2 * er[k];
      }
    }

    if (lightgcn_) {
      all_rows_.resize(static_cast<std::size_t>(state_.rows()));
      for (std::int64_t r = 0; r < state_.rows(); ++r) all_rows_[static_cast<std::size_t>(r)] = r;
      adam_step_rows(state_, grad_.data(), all_rows_, ctx_.cfg.model.lr);
    } else {
      adam_step_rows(state_, grad_.data(), touched_, ctx_.cfg.model.lr);
    }
    return {loss_acc, sigma_acc};
  }

  StageContext ctx_;
  EmbeddingState state_;
  int dim_;
  std::size_t total_;
  Rng sample_rng_;
  Rng shuffle_rng_;
  RecentNegatives recent_;
  bool lightgcn_ = false;
  std::vector<double> alphas_;
  GraphOperator graph_;
  std::vector<double> estar_, scratch_, grad_, gstar_;
  std::vector<std::pair<std::int32_t, std::int32_t>> positives_;
  SamplerStats stats_;
  CompactAlias global_table_;
  std::vector<std::pair<std::int32_t, std::int32_t>> last_negs_;
  std::vector<std::int64_t> touched_;
  std::vector<std::int64_t> all_rows_;
};

double elapsed_sec(std::chrono::steady_clock::time_point from) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - from).count();
}

}  // namespace

StageResult pretrain(const RunConfig& cfg, const DatasetBundle& data,
                     std::ostream* negatives_log) {
  if (!cfg.resolved()) fail(ErrorCategory::state, "config seeds must be resolved before training");
  EmbeddingState init = init_embeddings(data.maps.n_users(), data.maps.n_items(), cfg.model.dim,
                                        *cfg.init_seed, cfg.model.init_scale);
  StageContext ctx{cfg, data, cfg.stage1, nullptr, 1, negatives_log};

  // stage-1 icpns has no pretrained encoder; communities come from the init
  CommunityModel init_communities;
  if (cfg.stage1.strategy == Strategy::icpns) {
    std::vector<double> pts = clustering_points(cfg, data, init);
    init_communities =
        build_community_model(pts.data(), data.maps.n_users(), cfg.model.dim, data.train,
                              cfg.communities, cfg.stage1.alpha, *cfg.community_seed,
                              cfg.community_max_iter, cfg.community_tol);
    ctx.communities = &init_communities;
  }

  StageTrainer trainer(ctx, std::move(init));
  StageResult res;
  // the handoff to stage 2 is the best evaluated checkpoint, not the final
  // epoch; pretraining past the validation peak must not poison fine-tuning
  EmbeddingState best;
  bool have_best = false;
  double wall_acc = 0.0;
  for (int epoch = 1; epoch <= cfg.stage1_epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    auto [loss, sigma] = trainer.run_epoch();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss;
    rec.neg_sigma = sigma;
    rec.wall_sec = elapsed_sec(t0);
    wall_acc += rec.wall_sec;
    if (epoch % cfg.stage1_eval_every == 0 || epoch == cfg.stage1_epochs) {
      rec.evaluated = true;
      rec.val_ndcg = trainer.eval_val_ndcg();
      if (rec.val_ndcg > res.best_val_ndcg) {
        res.best_val_ndcg = rec.val_ndcg;
        res.best_epoch = epoch;
        rec.is_best = true;
        best = trainer.state();
        have_best = true;
      }
    }
    res.trace.push_back(rec);
    res.epochs_run = epoch;
  }
  res.mean_epoch_sec = res.epochs_run > 0 ? wall_acc / res.epochs_run : 0.0;
  res.sampler_stats = trainer.stats();
  res.last_epoch_negatives = trainer.take_last_epoch_negatives();
  res.recent_negatives = trainer.recent_snapshot();
  res.state = have_best ? std::move(best) : trainer.take_state();
  return res;
}

StageResult finetune(const RunConfig& cfg, const SamplerSpec& spec, const DatasetBundle& data,
                     const EmbeddingState& checkpoint, const CommunityModel& communities,
                     std::ostream* negatives_log) {
  if (!cfg.resolved()) fail(ErrorCategory::state, "config seeds must be resolved before training");
  EmbeddingState start = checkpoint;
  // fresh optimizer for the fine-tuning stage
  std::fill(start.adam_m.begin(), start.adam_m.end(), 0.0);
  std::fill(start.adam_v.begin(), start.adam_v.end(), 0.0);
  start.adam_step = 0;

  StageContext ctx{cfg, data, spec, spec.strategy == Strategy::icpns ? &communities : nullptr, 2,
                   negatives_log};
  StageTrainer trainer(ctx, std::move(start));

  StageResult res;
  res.best_val_ndcg = trainer.eval_val_ndcg();  // the checkpoint competes as epoch 0
  res.best_epoch = 0;
  EmbeddingState best = trainer.state();

  int bad = 0;
  int stop_after = std::max(cfg.patience, 1);
  double wall_acc = 0.0;
  for (int epoch = 1; epoch <= cfg.stage2_epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    auto [loss, sigma] = trainer.run_epoch();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss;
    rec.neg_sigma = sigma;
    rec.evaluated = true;
    rec.val_ndcg = trainer.eval_val_ndcg();
    rec.wall_sec = elapsed_sec(t0);
    wall_acc += rec.wall_sec;
    res.epochs_run = epoch;
    if (rec.val_ndcg > res.best_val_ndcg) {
      res.best_val_ndcg = rec.val_ndcg;
      res.best_epoch = epoch;
      rec.is_best = true;
      best = trainer.state();
      bad = 0;
    } else {
      ++bad;
    }
    res.trace.push_back(rec);
    if (bad >= stop_after) break;
  }
  res.mean_epoch_sec = res.epochs_run > 0 ? wall_acc / res.epochs_run : 0.0;
  res.sampler_stats = trainer.stats();
  res.last_epoch_negatives = trainer.take_last_epoch_negatives();
  res.recent_negatives = trainer.recent_snapshot();
  res.state = std::move(best);
  return res;
}

std::vector<double> clustering_points(const RunConfig& cfg, const DatasetBundle& data,
                                      const EmbeddingState& state) {
  std::size_t user_block = static_cast<std::size_t>(state.n_users) * state.dim;
  if (cfg.model.backbone == Backbone::mf)
    return {state.emb.begin(), state.emb.begin() + static_cast<std::ptrdiff_t>(user_block)};
  GraphOperator graph = GraphOperator::build(data.train);
  std::vector<double> estar(static_cast<std::size_t>(state.rows()) * state.dim);
  std::vector<double> scratch;
  propagate(graph, state.emb.data(), state.dim, cfg.model.layers, cfg.model.alphas(),
            estar.data(), scratch);
  estar.resize(user_block);
  return estar;
}

std::pair<DatasetBundle, std::optional<ExposureLog>> load_dataset(const RunConfig& cfg) {
  if (cfg.data_format == "bundle") {
    DatasetBundle bundle = load_bundle(cfg.data_path);
    auto violations = validate_bundle(bundle);
    if (!violations.empty())
      fail(ErrorCategory::validation, "bundle " + cfg.data_path + " is invalid: " +
                                          violations.front().kind + " in " +
                                          violations.front().where);
    std::optional<ExposureLog> log;
    auto exp_path = std::filesystem::path(cfg.data_path) / "exposure.tsv";
    if (std::filesystem::exists(exp_path)) {
      log = load_exposure(exp_path);
      log->exposed.resize(static_cast<std::size_t>(bundle.maps.n_users()));
    }
    return {std::move(bundle), std::move(log)};
  }
  // inline prep from a raw ratings file
  RawRatings raw = load_raw(cfg.data_path, parse_raw_format(cfg.data_format), true);
  auto pairs = binarize(raw);
  KcoreResult core = kcore_filter(pairs, cfg.k_user, cfg.k_item);
  return {split(core.pairs, cfg.ratios, *cfg.split_seed), std::nullopt};
}

namespace {

nlohmann::json trace_json(const std::vector<EpochRecord>& trace) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : trace) {
    nlohmann::json e;
    e["epoch"] = r.epoch;
    e["loss"] = r.mean_loss;
    e["neg_sigma"] = r.neg_sigma;
    e["val_ndcg"] = r.evaluated ? nlohmann::json(r.val_ndcg) : nlohmann::json(nullptr);
    e["best"] = r.is_best;
    e["wall_sec"] = r.wall_sec;
    arr.push_back(std::move(e));
  }
  return arr;
}

nlohmann::json stats_json(const SamplerStats& s) {
  return {{"draws", s.draws},
          {"rejections", s.rejections},
          {"exact_fallbacks", s.exact_fallbacks},
          {"rns_fallbacks", s.rns_fallbacks}};
}

void write_trace_csv(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, const std::vector<EpochRecord>*>>& stages) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCategory::io, "cannot write " + path.string());
  f << "stage,epoch,loss,neg_sigma,val_ndcg,best,wall_sec\n";
  for (const auto& [name, trace] : stages) {
    for (const auto& r : *trace) {
      f << name << ',' << r.epoch << ',' << r.mean_loss << ',' << r.neg_sigma << ',';
      if (r.evaluated) f << r.val_ndcg;
      f << ',' << (r.is_best ? 1 : 0) << ',' << r.wall_sec << '\n';
    }
  }
}

struct StageOneArtifacts {
  DatasetBundle data;
  std::optional<ExposureLog> exposure;
  StageResult stage1;
  CommunityModel communities;
  ClusterQuality quality_before;
  std::vector<double> points_before;
  nlohmann::json dataset_info;
  nlohmann::json stage1_info;
  nlohmann::json community_info;
};

// Everything shared by the configured strategies: data, warm-up, communities.
StageOneArtifacts run_shared_stages(const RunConfig& cfg, const std::filesystem::path& out) {
  StageOneArtifacts art;
  auto [data, exposure] = load_dataset(cfg);
  art.data = std::move(data);
  art.exposure = std::move(exposure);

  art.dataset_info = {{"source", cfg.data_path},
                      {"format", cfg.data_format},
                      {"n_users", art.data.maps.n_users()},
                      {"n_items", art.data.maps.n_items()},
                      {"nnz",
                       {{"train", art.data.train.nnz()},
                        {"val", art.data.val.nnz()},
                        {"test", art.data.test.nnz()}}},
                      {"exposure_available", art.exposure.has_value()}};

  art.stage1 = pretrain(cfg, art.data);
  CheckpointHeader header;
  header.backbone = to_string(cfg.model.backbone);
  header.layers = cfg.model.layers;
  header.step = art.stage1.state.adam_step;
  header.seed = *cfg.init_seed;
  header.config_hash = config_hash(cfg);
  save_checkpoint(out / "stage1.ckpt", art.stage1.state, header);

  art.stage1_info = {{"strategy", to_string(cfg.stage1.strategy)},
                     {"epochs_run", art.stage1.epochs_run},
                     {"best_epoch", art.stage1.best_epoch},
                     {"best_val_ndcg", art.stage1.best_val_ndcg},
                     {"sampler_stats", stats_json(art.stage1.sampler_stats)},
                     {"trace", trace_json(art.stage1.trace)}};

  art.points_before = clustering_points(cfg, art.data, art.stage1.state);
  art.communities = build_community_model(art.points_before.data(), art.data.maps.n_users(),
                                          cfg.model.dim, art.data.train, cfg.communities,
                                          cfg.stage2.alpha, *cfg.community_seed,
                                          cfg.community_max_iter, cfg.community_tol);
  save_community_model(art.communities, out / "community.model");

  std::vector<std::int64_t> sizes(static_cast<std::size_t>(cfg.communities), 0);
  for (std::int32_t c : art.communities.assignment) ++sizes[static_cast<std::size_t>(c)];
  std::int32_t nonempty = 0;
  for (auto s : sizes)
    if (s > 0) ++nonempty;
  art.community_info = {{"count", cfg.communities},
                        {"alpha", cfg.stage2.alpha},
                        {"seed", *cfg.community_seed},
                        {"sizes", sizes},
                        {"adam_reset", true}};
  if (nonempty >= 2) {
    art.quality_before = clustering_quality(art.points_before.data(), art.data.maps.n_users(),
                                            cfg.model.dim, art.communities.assignment);
    art.community_info["quality_before"] = {{"silhouette", art.quality_before.silhouette},
                                            {"calinski_harabasz", art.quality_before.calinski_harabasz}};
  } else {
    art.community_info["quality_before"] = nullptr;
  }
  return art;
}

// Fine-tune one strategy and assemble its report entry. Artifacts are
// written into `out`.
nlohmann::json run_strategy(const RunConfig& cfg, const SamplerSpec& spec,
                            StageOneArtifacts& art, const std::filesystem::path& out) {
  std::ofstream neg_log;
  std::ostream* neg_stream = nullptr;
  if (cfg.log_negatives) {
    neg_log.open(out / "negatives.log", std::ios::binary);
    if (!neg_log) fail(ErrorCategory::io, "cannot write " + (out / "negatives.log").string());
    neg_stream = &neg_log;
  }

  StageResult ft = finetune(cfg, spec, art.data, art.stage1.state, art.communities, neg_stream);

  CheckpointHeader header;
  header.backbone = to_string(cfg.model.backbone);
  header.layers = cfg.model.layers;
  header.step = ft.state.adam_step;
  header.seed = *cfg.init_seed;
  header.config_hash = config_hash(cfg);
  save_checkpoint(out / "stage2.best.ckpt", ft.state, header);

  // evaluation on the test split, excluding train and val positives
  std::vector<double> final_emb;
  const double* fin = ft.state.emb.data();
  if (cfg.model.backbone == Backbone::lightgcn) {
    GraphOperator graph = GraphOperator::build(art.data.train);
    final_emb.resize(static_cast<std::size_t>(ft.state.rows()) * ft.state.dim);
    std::vector<double> scratch;
    propagate(graph, ft.state.emb.data(), ft.state.dim, cfg.model.layers, cfg.model.alphas(),
              final_emb.data(), scratch);
    fin = final_emb.data();
  }
  ScoreView view{fin, fin + static_cast<std::int64_t>(ft.state.n_users) * ft.state.dim,
                 ft.state.dim, ft.state.n_users, ft.state.n_items};
  const Interactions* excl[] = {&art.data.train, &art.data.val};
  MetricReport test = evaluate_ranking(view, art.data.test, excl, cfg.eval_k);

  nlohmann::json diag;
  diag["holdout_hit"] = holdout_hit(ft.recent_negatives, art.data.val, cfg.eval_k);
  if (!ft.last_epoch_negatives.empty())
    diag["hardness"] = hardness(view, ft.last_epoch_negatives);
  else
    diag["hardness"] = nullptr;
  if (art.exposure && !ft.last_epoch_negatives.empty())
    diag["realness"] = exposure_realness(ft.last_epoch_negatives, *art.exposure);
  diag["sampler_stats"] = stats_json(ft.sampler_stats);

  // same partition, moved embeddings
  std::vector<double> points_after = clustering_points(cfg, art.data, ft.state);
  bool measurable = art.community_info.contains("quality_before") &&
                    !art.community_info["quality_before"].is_null();
  if (measurable) {
    ClusterQuality after = clustering_quality(points_after.data(), art.data.maps.n_users(),
                                              cfg.model.dim, art.communities.assignment);
    diag["quality_after"] = {{"silhouette", after.silhouette},
                             {"calinski_harabasz", after.calinski_harabasz}};
  } else {
    diag["quality_after"] = nullptr;
  }

  nlohmann::json entry;
  entry["name"] = to_string(spec.strategy);
  entry["spec"] = {{"strategy", to_string(spec.strategy)},
                   {"alpha", spec.alpha},
                   {"candidates", spec.candidates},
                   {"retry_cap", spec.retry_cap}};
  entry["epochs_run"] = ft.epochs_run;
  entry["best_epoch"] = ft.best_epoch;
  entry["best_val_ndcg"] = ft.best_val_ndcg;
  entry["test"] = {{"k", test.k},          {"n_users", test.n_users}, {"recall", test.recall},
                   {"ndcg", test.ndcg},    {"mrr", test.mrr},         {"precision", test.precision}};
  entry["diagnostics"] = std::move(diag);
  entry["timing"] = {{"mean_epoch_sec", ft.mean_epoch_sec},
                     {"total_sec", ft.mean_epoch_sec * ft.epochs_run}};
  entry["trace"] = trace_json(ft.trace);

  write_trace_csv(out / "trace.csv", {{"stage1:" + to_string(cfg.stage1.strategy), &art.stage1.trace},
                                      {"stage2:" + to_string(spec.strategy), &ft.trace}});
  return entry;
}

void write_resolved(const RunConfig& cfg, const std::filesystem::path& out) {
  std::ofstream f(out / "config.resolved", std::ios::binary);
  if (!f) fail(ErrorCategory::io, "cannot write " + (out / "config.resolved").string());
  f << config_to_json(cfg).dump(2) << '\n';
}

}  // namespace

double ExperimentReport::test_ndcg(const std::string& strategy) const {
  for (const auto& s : document.at("strategies"))
    if (s.at("name") == strategy) return s.at("test").at("ndcg").get<double>();
  fail(ErrorCategory::state, "strategy '" + strategy + "' not present in report");
}

double ExperimentReport::test_recall(const std::string& strategy) const {
  for (const auto& s : document.at("strategies"))
    if (s.at("name") == strategy) return s.at("test").at("recall").get<double>();
  fail(ErrorCategory::state, "strategy '" + strategy + "' not present in report");
}

ExperimentReport run_experiment(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  resolve_seeds(cfg);
  validate_config(cfg);
  std::filesystem::path out(cfg.out_dir);
  std::filesystem::create_directories(out);
  write_resolved(cfg, out);

  StageOneArtifacts art = run_shared_stages(cfg, out);
  nlohmann::json report;
  report["config"] = config_to_json(cfg);
  report["dataset"] = art.dataset_info;
  report["stage1"] = art.stage1_info;
  report["community"] = art.community_info;
  report["strategies"] = nlohmann::json::array();
  report["strategies"].push_back(run_strategy(cfg, cfg.stage2, art, out));

  write_report_json(out / "report.json", report);
  append_metrics_csv(out / "metrics.csv", report, out.filename().string());
  return {std::move(report)};
}

ExperimentReport compare_strategies(const RunConfig& cfg_in, const std::vector<SamplerSpec>& specs) {
  if (specs.empty()) fail(ErrorCategory::config, "compare needs at least one strategy");
  RunConfig cfg = cfg_in;
  resolve_seeds(cfg);
  validate_config(cfg);
  std::filesystem::path out(cfg.out_dir);
  std::filesystem::create_directories(out);
  write_resolved(cfg, out);

  StageOneArtifacts art = run_shared_stages(cfg, out);
  nlohmann::json report;
  report["config"] = config_to_json(cfg);
  report["dataset"] = art.dataset_info;
  report["stage1"] = art.stage1_info;
  report["community"] = art.community_info;
  report["strategies"] = nlohmann::json::array();

  for (const SamplerSpec& spec : specs) {
    std::filesystem::path sub = out / to_string(spec.strategy);
    std::filesystem::create_directories(sub);
    RunConfig scfg = cfg;
    scfg.stage2 = spec;
    scfg.out_dir = sub.string();
    write_resolved(scfg, sub);
    nlohmann::json entry = run_strategy(scfg, spec, art, sub);

    nlohmann::json sub_report;
    sub_report["config"] = config_to_json(scfg);
    sub_report["dataset"] = art.dataset_info;
    sub_report["stage1"] = art.stage1_info;
    sub_report["community"] = art.community_info;
    sub_report["strategies"] = nlohmann::json::array({entry});
    write_report_json(sub / "report.json", sub_report);
    append_metrics_csv(sub / "metrics.csv", sub_report, sub.filename().string());

    report["strategies"].push_back(std::move(entry));
  }

  write_report_json(out / "report.json", report);
  append_metrics_csv(out / "metrics.csv", report, out.filename().string());
  return {std::move(report)};
}

}  // namespace icpns
