#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "icpns/dataset.hpp"

namespace icpns {

enum class Backbone { mf, lightgcn };

Backbone parse_backbone(const std::string& name);
std::string to_string(Backbone b);

struct ModelConfig {
  Backbone backbone = Backbone::lightgcn;
  int dim = 64;
  int layers = 2;                      // K; ignored by mf
  std::vector<double> layer_weights;   // empty -> uniform 1/(K+1)
  double l2 = 1e-4;
  double lr = 1e-3;
  double init_scale = 0.1;

  // materialized alpha_0..alpha_K
  std::vector<double> alphas() const;
};

// Base embeddings plus Adam state, stored as one (n_users + n_items) x dim
// row-major block with users first.
struct EmbeddingState {
  std::int32_t n_users = 0;
  std::int32_t n_items = 0;
  int dim = 0;
  std::vector<double> emb;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::int64_t adam_step = 0;

  std::int64_t rows() const { return static_cast<std::int64_t>(n_users) + n_items; }
  double* row(std::int64_t r) { return emb.data() + r * dim; }
  const double* row(std::int64_t r) const { return emb.data() + r * dim; }
  double* user_row(std::int32_t u) { return row(u); }
  const double* user_row(std::int32_t u) const { return row(u); }
  double* item_row(std::int32_t i) { return row(static_cast<std::int64_t>(n_users) + i); }
  const double* item_row(std::int32_t i) const { return row(static_cast<std::int64_t>(n_users) + i); }

  double l2_norm() const;
};

// Gaussian init, mean 0, sd = scale; Adam moments zeroed.
EmbeddingState init_embeddings(std::int32_t n_users, std::int32_t n_items, int dim,
                               std::uint64_t seed, double scale);

// Symmetrically normalized bipartite adjacency D^-1/2 A D^-1/2 over the
// combined (user + item) node set, stored as CSR in both directions.
class GraphOperator {
 public:
  GraphOperator() = default;
  static GraphOperator build(const Interactions& train);

  std::int32_t n_users() const { return n_users_; }
  std::int32_t n_items() const { return n_items_; }
  std::int64_t rows() const { return static_cast<std::int64_t>(n_users_) + n_items_; }

  // out = A_hat * in, both (n_users + n_items) x dim row-major
  void apply(const double* in, double* out, int dim) const;

  // matrix entry for tests; row/col are combined indices
  double entry(std::int64_t row, std::int64_t col) const;

 private:
  std::int32_t n_users_ = 0;
  std::int32_t n_items_ = 0;
  std::vector<std::int64_t> u_off_, i_off_;
  std::vector<std::int32_t> u_col_, i_col_;  // item / user neighbor indices
  std::vector<double> u_w_, i_w_;
};

// out = sum_k alpha[k] * A_hat^k * base. scratch is resized as needed.
void propagate(const GraphOperator& g, const double* base, int dim, int layers,
               std::span<const double> alpha, double* out, std::vector<double>& scratch);

// Non-owning score view over final representations: score(u,i) = e_u . e_i.
struct ScoreView {
  const double* users = nullptr;
  const double* items = nullptr;
  int dim = 0;
  std::int32_t n_users = 0;
  std::int32_t n_items = 0;

  double operator()(std::int32_t u, std::int32_t i) const {
    const double* a = users + static_cast<std::int64_t>(u) * dim;
    const double* b = items + static_cast<std::int64_t>(i) * dim;
    double s = 0.0;
    for (int d = 0; d < dim; ++d) s += a[d] * b[d];
    return s;
  }
};

// Mean BPR loss over a batch of (positive score, negative score) pairs plus
// lambda * ||theta||^2. Uses softplus(-d) for overflow safety.
double bpr_loss(std::span<const std::pair<double, double>> score_pairs, double l2,
                double theta_norm);

// Per-triplet BPR gradient wrt the base embeddings, including the L2 term on
// the three touched base rows. Rows are combined indices, sorted. graph may
// be null for mf. Reference-grade (propagates per call); the trainer uses a
// batched path.
struct SparseGrad {
  std::vector<std::pair<std::int64_t, std::vector<double>>> rows;
};
SparseGrad bpr_gradients(const EmbeddingState& state, const ModelConfig& cfg,
                         const GraphOperator* graph, std::int32_t u, std::int32_t i_pos,
                         std::int32_t i_neg);

// Sparse Adam over the touched rows of a dense gradient buffer. Aborts (and
// leaves state untouched) when a touched gradient entry is non-finite.
void adam_step_rows(EmbeddingState& state, const double* grad,
                    std::span<const std::int64_t> touched, double lr,
                    double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

struct CheckpointHeader {
  std::string backbone;
  std::int32_t n_users = 0;
  std::int32_t n_items = 0;
  int dim = 0;
  int layers = 0;
  std::int64_t step = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string endianness;  // recorded at save time; loads require a match
};

void save_checkpoint(const std::filesystem::path& path, const EmbeddingState& state,
                     const CheckpointHeader& header);
std::pair<EmbeddingState, CheckpointHeader> load_checkpoint(const std::filesystem::path& path);

}  // namespace icpns
