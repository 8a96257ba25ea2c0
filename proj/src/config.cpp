#include "icpns/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "icpns/errors.hpp"

namespace icpns {

namespace {

[[noreturn]] void bad_key(const std::string& path) {
  fail(ErrorCategory::config, "unknown config key '" + path + "'");
}

void expect_object(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) fail(ErrorCategory::config, "config section '" + path + "' must be an object");
}

template <typename T>
void read_scalar(const nlohmann::json& j, T& out, const std::string& path) {
  try {
    out = j.get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCategory::config, "bad value for config key '" + path + "'");
  }
}

void read_seed(const nlohmann::json& j, std::optional<std::uint64_t>& out, const std::string& path) {
  if (j.is_null()) {
    out.reset();
    return;
  }
  std::uint64_t v = 0;
  read_scalar(j, v, path);
  out = v;
}

void read_sampler_stage(const nlohmann::json& j, SamplerSpec& spec, const std::string& path) {
  expect_object(j, path);
  for (const auto& [key, value] : j.items()) {
    std::string p = path + "." + key;
    if (key == "strategy") {
      std::string name;
      read_scalar(j.at(key), name, p);
      spec.strategy = parse_strategy(name);
    } else if (key == "alpha") {
      read_scalar(value, spec.alpha, p);
    } else if (key == "candidates") {
      read_scalar(value, spec.candidates, p);
    } else if (key == "retry_cap") {
      read_scalar(value, spec.retry_cap, p);
    } else {
      bad_key(p);
    }
  }
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& doc) {
  expect_object(doc, "<root>");
  RunConfig cfg;
  for (const auto& [section, body] : doc.items()) {
    if (section == "dataset") {
      expect_object(body, section);
      for (const auto& [key, value] : body.items()) {
        std::string p = section + "." + key;
        if (key == "path")
          read_scalar(value, cfg.data_path, p);
        else if (key == "format")
          read_scalar(value, cfg.data_format, p);
        else if (key == "k_user")
          read_scalar(value, cfg.k_user, p);
        else if (key == "k_item")
          read_scalar(value, cfg.k_item, p);
        else
          bad_key(p);
      }
    } else if (section == "split") {
      expect_object(body, section);
      for (const auto& [key, value] : body.items()) {
        std::string p = section + "." + key;
        if (key == "ratios") {
          if (!value.is_array() || value.size() != 3)
            fail(ErrorCategory::config, "'split.ratios' must be an array of three numbers");
          for (int k = 0; k < 3; ++k) read_scalar(value.at(k), cfg.ratios[k], p);
        } else if (key == "seed") {
          read_seed(value, cfg.split_seed, p);
        } else {
          bad_key(p);
        }
      }
    } else if (section == "model") {
      expect_object(body, section);
      for (const auto& [key, value] : body.items()) {
        std::string p = section + "." + key;
        if (key == "backbone") {
          std::string name;
          read_scalar(value, name, p);
          cfg.model.backbone = parse_backbone(name);
        } else if (key == "dim")
          read_scalar(value, cfg.model.dim, p);
        else if (key == "layers")
          read_scalar(value, cfg.model.layers, p);
        else if (key == "layer_weights") {
          if (value.is_null())
            cfg.model.layer_weights.clear();
          else
            read_scalar(value, cfg.model.layer_weights, p);
        } else if (key == "l2")
          read_scalar(value, cfg.model.l2, p);
        else if (key == "lr")
          read_scalar(value, cfg.model.lr, p);
        else if (key == "init_scale")
          read_scalar(value, cfg.model.init_scale, p);
        else if (key == "init_seed")
          read_seed(value, cfg.init_seed, p);
        else
          bad_key(p);
      }
    } else if (section == "sampler") {
      expect_object(body, section);
      for (const auto& [key, value] : body.items()) {
        std::string p = section + "." + key;
        if (key == "seed")
          read_seed(value, cfg.sampler_seed, p);
        else if (key == "stage1")
          read_sampler_stage(value, cfg.stage1, p);
        else if (key == "stage2")
          read_sampler_stage(value, cfg.stage2, p);
        else
          bad_key(p);
      }
    } else if (section == "community") {
      expect_object(body, section);
      for (const auto& [key, value] : body.items()) {
        std::string p = section + "." + key;
        if (key == "count")
          read_scalar(value, cfg.communities, p);
        else if (key == "seed")
          read_seed(value, cfg.community_seed, p);
        else if (key == "max_iter")
          read_scalar(value, cfg.community_max_iter, p);
        else if (key == "tol")
          read_scalar(value, cfg.community_tol, p);
        else
          bad_key(p);
      }
    } else if (section == "train") {
      expect_object(body, section);
      for (const auto& [key, value] : body.items()) {
        std::string p = section + "." + key;
        if (key == "batch_size")
          read_scalar(value, cfg.batch_size, p);
        else if (key == "stage1_epochs")
          read_scalar(value, cfg.stage1_epochs, p);
        else if (key == "stage2_epochs")
          read_scalar(value, cfg.stage2_epochs, p);
        else if (key == "patience")
          read_scalar(value, cfg.patience, p);
        else if (key == "stage1_eval_every")
          read_scalar(value, cfg.stage1_eval_every, p);
        else
          bad_key(p);
      }
    } else if (section == "eval") {
      expect_object(body, section);
      for (const auto& [key, value] : body.items()) {
        std::string p = section + "." + key;
        if (key == "k")
          read_scalar(value, cfg.eval_k, p);
        else
          bad_key(p);
      }
    } else if (section == "log_negatives") {
      read_scalar(body, cfg.log_negatives, section);
    } else if (section == "output") {
      read_scalar(body, cfg.out_dir, section);
    } else {
      bad_key(section);
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCategory::io, "cannot read " + path.string());
  nlohmann::json doc;
  try {
    f >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::parse, path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

void apply_overrides(nlohmann::json& doc, const std::vector<std::string>& overrides) {
  for (const std::string& ov : overrides) {
    std::size_t eq = ov.find('=');
    if (eq == std::string::npos || eq == 0)
      fail(ErrorCategory::config, "override '" + ov + "' is not of the form key=value");
    std::string path = ov.substr(0, eq);
    std::string raw = ov.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;  // bare words are strings

    nlohmann::json* node = &doc;
    std::size_t pos = 0;
    for (;;) {
      std::size_t dot = path.find('.', pos);
      std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
      if (key.empty()) fail(ErrorCategory::config, "override '" + ov + "' has an empty key segment");
      if (dot == std::string::npos) {
        (*node)[key] = value;
        break;
      }
      node = &(*node)[key];
      if (!node->is_object() && !node->is_null())
        fail(ErrorCategory::config, "override '" + ov + "' descends into a non-object");
      pos = dot + 1;
    }
  }
}

void resolve_seeds(RunConfig& cfg) {
  std::random_device rd;
  auto draw = [&rd]() {
    return (static_cast<std::uint64_t>(rd()) << 32) | static_cast<std::uint64_t>(rd());
  };
  if (!cfg.split_seed) cfg.split_seed = draw();
  if (!cfg.init_seed) cfg.init_seed = draw();
  if (!cfg.sampler_seed) cfg.sampler_seed = draw();
  if (!cfg.community_seed) cfg.community_seed = draw();
}

void validate_config(const RunConfig& cfg) {
  auto check = [](bool ok, const std::string& key, const std::string& why) {
    if (!ok) fail(ErrorCategory::config, "config key '" + key + "': " + why);
  };
  check(!cfg.data_path.empty(), "dataset.path", "must be set");
  check(cfg.data_format == "bundle" || cfg.data_format == "movielens-tab" ||
            cfg.data_format == "movielens-colon" || cfg.data_format == "csv",
        "dataset.format", "unknown format '" + cfg.data_format + "'");
  check(cfg.k_user >= 1, "dataset.k_user", "must be >= 1");
  check(cfg.k_item >= 1, "dataset.k_item", "must be >= 1");
  double rsum = cfg.ratios[0] + cfg.ratios[1] + cfg.ratios[2];
  check(std::abs(rsum - 1.0) <= 1e-9, "split.ratios", "must sum to 1");
  for (double r : cfg.ratios) check(r >= 0.0, "split.ratios", "must be non-negative");
  check(cfg.model.dim >= 1, "model.dim", "must be >= 1");
  check(cfg.model.layers >= 0, "model.layers", "must be >= 0");
  check(cfg.model.layer_weights.empty() ||
            cfg.model.layer_weights.size() ==
                static_cast<std::size_t>(cfg.model.backbone == Backbone::mf ? 1 : cfg.model.layers + 1),
        "model.layer_weights", "must have layers+1 entries");
  check(cfg.model.l2 >= 0.0, "model.l2", "must be >= 0");
  check(cfg.model.lr > 0.0, "model.lr", "must be > 0");
  check(cfg.model.init_scale > 0.0, "model.init_scale", "must be > 0");
  for (const auto& [spec, name] :
       {std::pair<const SamplerSpec&, const char*>{cfg.stage1, "sampler.stage1"},
        std::pair<const SamplerSpec&, const char*>{cfg.stage2, "sampler.stage2"}}) {
    check(spec.alpha >= 0.0 && spec.alpha <= 1.0, std::string(name) + ".alpha", "must be in [0, 1]");
    check(spec.candidates >= 1, std::string(name) + ".candidates", "must be >= 1");
    check(spec.retry_cap >= 1, std::string(name) + ".retry_cap", "must be >= 1");
  }
  check(cfg.communities >= 1, "community.count", "must be >= 1");
  check(cfg.community_max_iter >= 1, "community.max_iter", "must be >= 1");
  check(cfg.community_tol >= 0.0, "community.tol", "must be >= 0");
  check(cfg.batch_size >= 1, "train.batch_size", "must be >= 1");
  check(cfg.stage1_epochs >= 0, "train.stage1_epochs", "must be >= 0");
  check(cfg.stage2_epochs >= 0, "train.stage2_epochs", "must be >= 0");
  check(cfg.patience >= 0, "train.patience", "must be >= 0");
  check(cfg.stage1_eval_every >= 1, "train.stage1_eval_every", "must be >= 1");
  check(cfg.eval_k >= 1, "eval.k", "must be >= 1");
  check(!cfg.out_dir.empty(), "output", "must be set");
}

namespace {

nlohmann::json seed_json(const std::optional<std::uint64_t>& s) {
  if (s) return *s;
  return nullptr;
}

nlohmann::json sampler_stage_json(const SamplerSpec& spec) {
  return {{"strategy", to_string(spec.strategy)},
          {"alpha", spec.alpha},
          {"candidates", spec.candidates},
          {"retry_cap", spec.retry_cap}};
}

}  // namespace

nlohmann::json config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["dataset"] = {{"path", cfg.data_path},
                  {"format", cfg.data_format},
                  {"k_user", cfg.k_user},
                  {"k_item", cfg.k_item}};
  j["split"] = {{"ratios", cfg.ratios}, {"seed", seed_json(cfg.split_seed)}};
  j["model"] = {{"backbone", to_string(cfg.model.backbone)},
                {"dim", cfg.model.dim},
                {"layers", cfg.model.layers},
                {"layer_weights",
                 cfg.model.layer_weights.empty() ? nlohmann::json(nullptr)
                                                 : nlohmann::json(cfg.model.layer_weights)},
                {"l2", cfg.model.l2},
                {"lr", cfg.model.lr},
                {"init_scale", cfg.model.init_scale},
                {"init_seed", seed_json(cfg.init_seed)}};
  j["sampler"] = {{"seed", seed_json(cfg.sampler_seed)},
                  {"stage1", sampler_stage_json(cfg.stage1)},
                  {"stage2", sampler_stage_json(cfg.stage2)}};
  j["community"] = {{"count", cfg.communities},
                    {"seed", seed_json(cfg.community_seed)},
                    {"max_iter", cfg.community_max_iter},
                    {"tol", cfg.community_tol}};
  j["train"] = {{"batch_size", cfg.batch_size},
                {"stage1_epochs", cfg.stage1_epochs},
                {"stage2_epochs", cfg.stage2_epochs},
                {"patience", cfg.patience},
                {"stage1_eval_every", cfg.stage1_eval_every}};
  j["eval"] = {{"k", cfg.eval_k}};
  j["log_negatives"] = cfg.log_negatives;
  j["output"] = cfg.out_dir;
  return j;
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const RunConfig& cfg) {
  // fingerprint of everything that shapes the computation; the output
  // location does not, and excluding it keeps artifacts byte-stable across
  // destination directories
  nlohmann::json j = config_to_json(cfg);
  j.erase("output");
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

}  // namespace icpns
