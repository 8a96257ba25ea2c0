#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "icpns/encoder.hpp"
#include "icpns/sampler.hpp"
#include "json.hpp"

namespace icpns {

// Full experiment configuration. Seeds left unset are drawn from entropy at
// resolve time and recorded, so every run is reproducible from its resolved
// config.
struct RunConfig {
  // dataset
  std::string data_path;
  std::string data_format = "bundle";  // bundle | movielens-tab | movielens-colon | csv
  int k_user = 10;
  int k_item = 10;

  // split (only used when ingesting raw data)
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
  std::optional<std::uint64_t> split_seed;

  // model
  ModelConfig model;
  std::optional<std::uint64_t> init_seed;

  // sampling
  std::optional<std::uint64_t> sampler_seed;
  SamplerSpec stage1{Strategy::rns, 0.1, 10, 100};
  SamplerSpec stage2{Strategy::icpns, 0.1, 10, 100};

  // communities
  std::int32_t communities = 8;
  std::optional<std::uint64_t> community_seed;
  int community_max_iter = 100;
  double community_tol = 1e-6;

  // training
  int batch_size = 4096;
  int stage1_epochs = 300;
  int stage2_epochs = 300;
  int patience = 20;
  int stage1_eval_every = 10;

  // evaluation
  int eval_k = 10;

  bool log_negatives = false;
  std::string out_dir = "runs/run";

  bool resolved() const {
    return split_seed && init_seed && sampler_seed && community_seed;
  }
};

// Parse from a JSON document; rejects unknown keys with their dotted path.
RunConfig config_from_json(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

// "a.b.c=value" assignments on top of a JSON document; values are parsed as
// JSON scalars, bare words fall back to strings.
void apply_overrides(nlohmann::json& doc, const std::vector<std::string>& overrides);

// Draws any missing seed from entropy.
void resolve_seeds(RunConfig& cfg);

// Range/consistency checks; throws config errors naming the offending key.
void validate_config(const RunConfig& cfg);

// Resolved config as JSON (and its canonical fingerprint).
nlohmann::json config_to_json(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);

std::uint64_t fnv1a64(const std::string& data);

}  // namespace icpns
