#include "icpns/encoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "icpns/errors.hpp"
#include "icpns/rng.hpp"
#include "json.hpp"

namespace icpns {

Backbone parse_backbone(const std::string& name) {
  if (name == "mf" || name == "bpr-mf") return Backbone::mf;
  if (name == "lightgcn") return Backbone::lightgcn;
  fail(ErrorCategory::config, "unknown backbone '" + name + "'");
}

std::string to_string(Backbone b) { return b == Backbone::mf ? "mf" : "lightgcn"; }

std::vector<double> ModelConfig::alphas() const {
  int k = backbone == Backbone::mf ? 0 : layers;
  if (!layer_weights.empty()) {
    if (layer_weights.size() != static_cast<std::size_t>(k) + 1)
      fail(ErrorCategory::config, "layer_weights must have layers+1 entries");
    return layer_weights;
  }
  return std::vector<double>(static_cast<std::size_t>(k) + 1, 1.0 / (k + 1));
}

EmbeddingState init_embeddings(std::int32_t n_users, std::int32_t n_items, int dim,
                               std::uint64_t seed, double scale) {
  if (n_users < 1 || n_items < 1 || dim < 1)
    fail(ErrorCategory::config, "embedding shape must be positive");
  EmbeddingState s;
  s.n_users = n_users;
  s.n_items = n_items;
  s.dim = dim;
  std::size_t total = static_cast<std::size_t>(s.rows()) * dim;
  s.emb.resize(total);
  s.adam_m.assign(total, 0.0);
  s.adam_v.assign(total, 0.0);
  Rng rng = Rng::derive(seed, 0x696e6974ULL);  // init stream
  for (double& v : s.emb) v = scale * rng.normal();
  return s;
}

double EmbeddingState::l2_norm() const {
  double s = 0.0;
  for (double v : emb) s += v * v;
  return std::sqrt(s);
}

GraphOperator GraphOperator::build(const Interactions& train) {
  GraphOperator g;
  g.n_users_ = train.n_users();
  g.n_items_ = train.n_items();
  auto icounts = train.item_counts();

  g.u_off_.assign(static_cast<std::size_t>(g.n_users_) + 1, 0);
  g.i_off_.assign(static_cast<std::size_t>(g.n_items_) + 1, 0);
  for (std::int32_t u = 0; u < g.n_users_; ++u) g.u_off_[u + 1] = g.u_off_[u] + train.degree(u);
  for (std::int32_t i = 0; i < g.n_items_; ++i) g.i_off_[i + 1] = g.i_off_[i] + icounts[i];

  std::int64_t nnz = train.nnz();
  g.u_col_.resize(nnz);
  g.u_w_.resize(nnz);
  g.i_col_.resize(nnz);
  g.i_w_.resize(nnz);
  std::vector<std::int64_t> cursor(g.i_off_.begin(), g.i_off_.end() - 1);
  std::int64_t at = 0;
  for (std::int32_t u = 0; u < g.n_users_; ++u) {
    double du = static_cast<double>(train.degree(u));
    for (std::int32_t i : train.items(u)) {
      double w = 1.0 / std::sqrt(du * static_cast<double>(icounts[i]));
      g.u_col_[at] = i;
      g.u_w_[at] = w;
      ++at;
      std::int64_t c = cursor[i]++;
      g.i_col_[c] = u;
      g.i_w_[c] = w;
    }
  }
  return g;
}

void GraphOperator::apply(const double* in, double* out, int dim) const {
  const double* item_base = in + static_cast<std::int64_t>(n_users_) * dim;
  for (std::int32_t u = 0; u < n_users_; ++u) {
    double* dst = out + static_cast<std::int64_t>(u) * dim;
    std::fill(dst, dst + dim, 0.0);
    for (std::int64_t k = u_off_[u]; k < u_off_[u + 1]; ++k) {
      const double* src = item_base + static_cast<std::int64_t>(u_col_[k]) * dim;
      double w = u_w_[k];
      for (int d = 0; d < dim; ++d) dst[d] += w * src[d];
    }
  }
  double* item_out = out + static_cast<std::int64_t>(n_users_) * dim;
  for (std::int32_t i = 0; i < n_items_; ++i) {
    double* dst = item_out + static_cast<std::int64_t>(i) * dim;
    std::fill(dst, dst + dim, 0.0);
    for (std::int64_t k = i_off_[i]; k < i_off_[i + 1]; ++k) {
      const double* src = in + static_cast<std::int64_t>(i_col_[k]) * dim;
      double w = i_w_[k];
      for (int d = 0; d < dim; ++d) dst[d] += w * src[d];
    }
  }
}

double GraphOperator::entry(std::int64_t row, std::int64_t col) const {
  std::int64_t n = n_users_;
  if (row < n && col >= n) {
    std::int32_t i = static_cast<std::int32_t>(col - n);
    auto b = u_col_.begin() + u_off_[row], e = u_col_.begin() + u_off_[row + 1];
    auto it = std::lower_bound(b, e, i);
    if (it != e && *it == i) return u_w_[it - u_col_.begin()];
  } else if (row >= n && col < n) {
    std::int32_t u = static_cast<std::int32_t>(col);
    std::int64_t r = row - n;
    auto b = i_col_.begin() + i_off_[r], e = i_col_.begin() + i_off_[r + 1];
    auto it = std::lower_bound(b, e, u);
    if (it != e && *it == u) return i_w_[it - i_col_.begin()];
  }
  return 0.0;
}

void propagate(const GraphOperator& g, const double* base, int dim, int layers,
               std::span<const double> alpha, double* out, std::vector<double>& scratch) {
  if (alpha.size() != static_cast<std::size_t>(layers) + 1)
    fail(ErrorCategory::config, "layer weights must have layers+1 entries");
  std::size_t total = static_cast<std::size_t>(g.rows()) * dim;
  for (std::size_t t = 0; t < total; ++t) out[t] = alpha[0] * base[t];
  if (layers == 0) return;
  scratch.resize(2 * total);
  double* cur = scratch.data();
  double* nxt = scratch.data() + total;
  std::memcpy(cur, base, total * sizeof(double));
  for (int k = 1; k <= layers; ++k) {
    g.apply(cur, nxt, dim);
    double a = alpha[static_cast<std::size_t>(k)];
    for (std::size_t t = 0; t < total; ++t) out[t] += a * nxt[t];
    std::swap(cur, nxt);
  }
}

double bpr_loss(std::span<const std::pair<double, double>> score_pairs, double l2,
                double theta_norm) {
  if (score_pairs.empty()) fail(ErrorCategory::state, "bpr_loss over an empty batch");
  double acc = 0.0;
  for (const auto& [pos, neg] : score_pairs) {
    double d = pos - neg;
    // softplus(-d) = -ln(sigmoid(d)), overflow safe
    acc += std::max(-d, 0.0) + std::log1p(std::exp(-std::abs(d)));
  }
  return acc / static_cast<double>(score_pairs.size()) + l2 * theta_norm * theta_norm;
}

SparseGrad bpr_gradients(const EmbeddingState& state, const ModelConfig& cfg,
                         const GraphOperator* graph, std::int32_t u, std::int32_t i_pos,
                         std::int32_t i_neg) {
  int dim = state.dim;
  std::int64_t rows = state.rows();
  std::int64_t ru = u;
  std::int64_t rp = static_cast<std::int64_t>(state.n_users) + i_pos;
  std::int64_t rn = static_cast<std::int64_t>(state.n_users) + i_neg;
  auto alpha = cfg.alphas();

  std::vector<double> final_emb;
  const double* fin = state.emb.data();
  if (cfg.backbone == Backbone::lightgcn) {
    if (!graph) fail(ErrorCategory::state, "lightgcn gradients need a graph operator");
    final_emb.resize(static_cast<std::size_t>(rows) * dim);
    std::vector<double> scratch;
    propagate(*graph, state.emb.data(), dim, cfg.layers, alpha, final_emb.data(), scratch);
    fin = final_emb.data();
  }

  const double* eu = fin + ru * dim;
  const double* ep = fin + rp * dim;
  const double* en = fin + rn * dim;
  double d = 0.0;
  for (int k = 0; k < dim; ++k) d += eu[k] * (ep[k] - en[k]);
  double gcoef = -1.0 / (1.0 + std::exp(d));  // -sigmoid(-d)

  // gradient wrt final embeddings lives on three rows
  std::vector<double> gfin(static_cast<std::size_t>(rows) * dim, 0.0);
  for (int k = 0; k < dim; ++k) {
    gfin[ru * dim + k] += gcoef * (ep[k] - en[k]);
    gfin[rp * dim + k] += gcoef * eu[k];
    gfin[rn * dim + k] -= gcoef * eu[k];
  }

  // pull back to base embeddings
  std::vector<double> gbase;
  if (cfg.backbone == Backbone::lightgcn) {
    // A_hat is symmetric, so the adjoint of propagation is propagation
    gbase.resize(gfin.size());
    std::vector<double> scratch;
    propagate(*graph, gfin.data(), dim, cfg.layers, alpha, gbase.data(), scratch);
  } else {
    gbase = std::move(gfin);
  }
  for (int k = 0; k < dim; ++k) {
    gbase[ru * dim + k] += 2.0 * cfg.l2 * state.emb[ru * dim + k];
    gbase[rp * dim + k] += 2.0 * cfg.l2 * state.emb[rp * dim + k];
    gbase[rn * dim + k] += 2.0 * cfg.l2 * state.emb[rn * dim + k];
  }

  SparseGrad out;
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* g = gbase.data() + r * dim;
    bool nonzero = false;
    for (int k = 0; k < dim; ++k)
      if (g[k] != 0.0) {
        nonzero = true;
        break;
      }
    if (nonzero) out.rows.emplace_back(r, std::vector<double>(g, g + dim));
  }
  return out;
}

void adam_step_rows(EmbeddingState& state, const double* grad,
                    std::span<const std::int64_t> touched, double lr, double beta1,
                    double beta2, double eps) {
  int dim = state.dim;
  for (std::int64_t r : touched) {
    const double* g = grad + r * dim;
    for (int k = 0; k < dim; ++k)
      if (!std::isfinite(g[k]))
        fail(ErrorCategory::numeric, "non-finite gradient at row " + std::to_string(r));
  }
  ++state.adam_step;
  double t = static_cast<double>(state.adam_step);
  double c1 = 1.0 - std::pow(beta1, t);
  double c2 = 1.0 - std::pow(beta2, t);
  for (std::int64_t r : touched) {
    const double* g = grad + r * dim;
    double* m = state.adam_m.data() + r * dim;
    double* v = state.adam_v.data() + r * dim;
    double* e = state.emb.data() + r * dim;
    for (int k = 0; k < dim; ++k) {
      m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
      v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
      e[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
    }
  }
}

namespace {
constexpr char kCkptMagic[8] = {'I', 'C', 'P', 'N', 'S', 'C', 'K', '1'};

std::string native_endianness() {
  return std::endian::native == std::endian::little ? "little" : "big";
}
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const EmbeddingState& state,
                     const CheckpointHeader& header) {
  nlohmann::json h;
  h["format_version"] = 1;
  h["backbone"] = header.backbone;
  h["n_users"] = state.n_users;
  h["n_items"] = state.n_items;
  h["dim"] = state.dim;
  h["layers"] = header.layers;
  h["step"] = header.step;
  h["seed"] = header.seed;
  h["config_hash"] = header.config_hash;
  h["endianness"] = native_endianness();
  std::string hs = h.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCategory::io, "cannot write " + path.string());
  f.write(kCkptMagic, 8);
  std::uint32_t len = static_cast<std::uint32_t>(hs.size());
  f.write(reinterpret_cast<const char*>(&len), 4);
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  f.write(reinterpret_cast<const char*>(state.emb.data()),
          static_cast<std::streamsize>(state.emb.size() * sizeof(double)));
  if (!f) fail(ErrorCategory::io, "short write on " + path.string());
}

std::pair<EmbeddingState, CheckpointHeader> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCategory::io, "cannot read " + path.string());
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kCkptMagic, 8) != 0)
    fail(ErrorCategory::parse, path.string() + " is not a checkpoint file");
  std::uint32_t len = 0;
  f.read(reinterpret_cast<char*>(&len), 4);
  std::string hs(len, '\0');
  f.read(hs.data(), len);
  if (!f) fail(ErrorCategory::parse, "truncated checkpoint header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::parse, "bad checkpoint header: " + std::string(e.what()));
  }

  CheckpointHeader header;
  header.backbone = h.at("backbone").get<std::string>();
  header.n_users = h.at("n_users").get<std::int32_t>();
  header.n_items = h.at("n_items").get<std::int32_t>();
  header.dim = h.at("dim").get<int>();
  header.layers = h.at("layers").get<int>();
  header.step = h.at("step").get<std::int64_t>();
  header.seed = h.at("seed").get<std::uint64_t>();
  header.config_hash = h.at("config_hash").get<std::string>();
  header.endianness = h.at("endianness").get<std::string>();
  if (header.endianness != native_endianness())
    fail(ErrorCategory::parse, "checkpoint endianness '" + header.endianness +
                                   "' does not match this machine");

  EmbeddingState state;
  state.n_users = header.n_users;
  state.n_items = header.n_items;
  state.dim = header.dim;
  state.adam_step = 0;  // optimizer state is not checkpointed
  std::size_t total = static_cast<std::size_t>(state.rows()) * state.dim;
  state.emb.resize(total);
  state.adam_m.assign(total, 0.0);
  state.adam_v.assign(total, 0.0);
  f.read(reinterpret_cast<char*>(state.emb.data()),
         static_cast<std::streamsize>(total * sizeof(double)));
  if (!f) fail(ErrorCategory::parse, "truncated checkpoint payload");
  return {std::move(state), std::move(header)};
}

}  // namespace icpns
