// Command line front end: prep | synth | train | compare | eval | report.
// Exit codes: 0 ok, 2 usage/config error, 3 data or runtime error.
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "icpns/config.hpp"
#include "icpns/errors.hpp"
#include "icpns/pipeline.hpp"
#include "icpns/report.hpp"
#include "json.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

int exit_code_for(const icpns::Error& e) {
  return e.category() == icpns::ErrorCategory::config ? kExitUsage : kExitRuntime;
}

std::array<double, 3> parse_ratios(const std::string& text) {
  std::array<double, 3> out{};
  std::size_t pos = 0;
  for (int k = 0; k < 3; ++k) {
    std::size_t comma = text.find(',', pos);
    std::string tok = text.substr(pos, comma == std::string::npos ? comma : comma - pos);
    try {
      out[k] = std::stod(tok);
    } catch (...) {
      icpns::fail(icpns::ErrorCategory::config, "bad ratio list '" + text + "'");
    }
    if (comma == std::string::npos && k < 2)
      icpns::fail(icpns::ErrorCategory::config, "ratio list needs three comma-separated values");
    pos = comma + 1;
  }
  return out;
}

icpns::RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream f(path, std::ios::binary);
  if (!f) icpns::fail(icpns::ErrorCategory::io, "cannot read " + path);
  nlohmann::json doc;
  try {
    f >> doc;
  } catch (const nlohmann::json::exception& e) {
    icpns::fail(icpns::ErrorCategory::parse, path + ": " + e.what());
  }
  icpns::apply_overrides(doc, overrides);
  icpns::RunConfig cfg = icpns::config_from_json(doc);
  icpns::resolve_seeds(cfg);
  icpns::validate_config(cfg);
  return cfg;
}

int cmd_prep(const std::string& raw, const std::string& format, int k_user, int k_item,
             std::uint64_t seed, const std::string& out, const std::string& ratios, bool lenient) {
  icpns::PrepStats stats =
      icpns::prep_dataset(raw, icpns::parse_raw_format(format), k_user, k_item,
                          parse_ratios(ratios), seed, out, !lenient);
  nlohmann::json j = {{"raw_records", stats.raw_records},
                      {"malformed_lines", stats.malformed_lines},
                      {"binarized_pairs", stats.binarized_pairs},
                      {"kcore_iterations", stats.kcore_iterations},
                      {"n_users", stats.n_users},
                      {"n_items", stats.n_items},
                      {"interactions", stats.interactions},
                      {"out", out}};
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int cmd_synth(const icpns::SyntheticConfig& cfg, const std::string& out) {
  icpns::SyntheticResult res = icpns::generate_synthetic(cfg);
  icpns::save_bundle(res.bundle, out);
  icpns::save_exposure(res.log, std::filesystem::path(out) / "exposure.tsv");
  nlohmann::json j = {{"n_users", res.bundle.maps.n_users()},
                      {"n_items", res.bundle.maps.n_items()},
                      {"interactions",
                       res.bundle.train.nnz() + res.bundle.val.nnz() + res.bundle.test.nnz()},
                      {"out", out}};
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides) {
  icpns::RunConfig cfg = load_run_config(config_path, overrides);
  icpns::ExperimentReport report = icpns::run_experiment(cfg);
  auto rows = icpns::collect_rows(report.document, std::filesystem::path(cfg.out_dir).filename().string());
  std::cout << icpns::markdown_table(rows);
  std::cout << "run directory: " << cfg.out_dir << '\n';
  return kExitOk;
}

int cmd_compare(const std::string& config_path, const std::string& strategies,
                const std::vector<std::string>& overrides) {
  icpns::RunConfig cfg = load_run_config(config_path, overrides);
  std::vector<icpns::SamplerSpec> specs;
  std::size_t pos = 0;
  while (pos <= strategies.size()) {
    std::size_t comma = strategies.find(',', pos);
    std::string tok = strategies.substr(pos, comma == std::string::npos ? comma : comma - pos);
    if (tok.empty()) icpns::fail(icpns::ErrorCategory::config, "empty strategy name in list");
    icpns::SamplerSpec spec = cfg.stage2;
    spec.strategy = icpns::parse_strategy(tok);
    specs.push_back(spec);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  icpns::ExperimentReport report = icpns::compare_strategies(cfg, specs);
  auto rows = icpns::collect_rows(report.document, std::filesystem::path(cfg.out_dir).filename().string());
  std::cout << icpns::markdown_table(rows);
  std::cout << "run directory: " << cfg.out_dir << '\n';
  return kExitOk;
}

int cmd_eval(const std::string& ckpt, const std::string& data_dir, int k) {
  auto [state, header] = icpns::load_checkpoint(ckpt);
  icpns::DatasetBundle bundle = icpns::load_bundle(data_dir);
  if (bundle.maps.n_users() != state.n_users || bundle.maps.n_items() != state.n_items)
    icpns::fail(icpns::ErrorCategory::validation, "checkpoint shape does not match the bundle");

  icpns::ModelConfig model;
  model.backbone = icpns::parse_backbone(header.backbone);
  model.dim = state.dim;
  model.layers = header.layers;

  std::vector<double> final_emb;
  const double* fin = state.emb.data();
  if (model.backbone == icpns::Backbone::lightgcn) {
    icpns::GraphOperator graph = icpns::GraphOperator::build(bundle.train);
    final_emb.resize(static_cast<std::size_t>(state.rows()) * state.dim);
    std::vector<double> scratch;
    icpns::propagate(graph, state.emb.data(), state.dim, model.layers, model.alphas(),
                     final_emb.data(), scratch);
    fin = final_emb.data();
  }
  icpns::ScoreView view{fin, fin + static_cast<std::int64_t>(state.n_users) * state.dim,
                        state.dim, state.n_users, state.n_items};
  const icpns::Interactions* excl[] = {&bundle.train, &bundle.val};
  icpns::MetricReport rep = icpns::evaluate_ranking(view, bundle.test, excl, k);
  nlohmann::json j = {{"k", rep.k},           {"n_users", rep.n_users},
                      {"recall", rep.recall}, {"ndcg", rep.ndcg},
                      {"mrr", rep.mrr},       {"precision", rep.precision},
                      {"backbone", header.backbone}};
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& runs, const std::string& format) {
  if (format != "markdown-table")
    icpns::fail(icpns::ErrorCategory::config, "unknown report format '" + format + "'");
  std::vector<icpns::ReportRow> rows;
  for (const std::string& dir : runs) {
    nlohmann::json rep = icpns::read_report_json(std::filesystem::path(dir) / "report.json");
    auto sub = icpns::collect_rows(rep, std::filesystem::path(dir).filename().string());
    rows.insert(rows.end(), sub.begin(), sub.end());
  }
  std::cout << icpns::markdown_table(rows);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-stage negative sampling lab for implicit feedback recommenders"};
  app.require_subcommand(1);

  // prep
  auto* prep = app.add_subcommand("prep", "ingest a raw ratings file into a dataset bundle");
  std::string prep_raw, prep_format = "movielens-tab", prep_out, prep_ratios = "0.8,0.1,0.1";
  int prep_k = 10, prep_k_user = -1, prep_k_item = -1;
  std::uint64_t prep_seed = 0;
  bool prep_lenient = false;
  prep->add_option("raw", prep_raw, "raw ratings file")->required();
  prep->add_option("--format", prep_format, "movielens-tab | movielens-colon | csv");
  prep->add_option("--k", prep_k, "k-core threshold for users and items");
  prep->add_option("--k-user", prep_k_user, "user threshold override");
  prep->add_option("--k-item", prep_k_item, "item threshold override");
  prep->add_option("--seed", prep_seed, "split seed")->required();
  prep->add_option("--out", prep_out, "bundle output directory")->required();
  prep->add_option("--ratios", prep_ratios, "train,val,test ratios");
  prep->add_flag("--lenient", prep_lenient, "skip malformed lines instead of aborting");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a community-structured synthetic bundle");
  icpns::SyntheticConfig synth_cfg;
  std::string synth_out;
  synth->add_option("--users", synth_cfg.n_users, "number of users");
  synth->add_option("--items", synth_cfg.n_items, "number of items");
  synth->add_option("--communities", synth_cfg.n_communities, "number of communities");
  synth->add_option("--exposure-rate", synth_cfg.exposure_rate, "in-block exposure probability");
  synth->add_option("--click-rate", synth_cfg.click_rate, "click probability given exposure");
  synth->add_option("--seed", synth_cfg.seed, "generator seed")->required();
  synth->add_option("--out", synth_out, "bundle output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "run the two-stage pipeline from a config file");
  std::string train_config;
  std::vector<std::string> train_overrides;
  train->add_option("--config", train_config, "config JSON path")->required();
  train->add_option("overrides", train_overrides, "key=value config overrides");

  // compare
  auto* compare = app.add_subcommand("compare", "fine-tune several strategies from one warm start");
  std::string compare_config, compare_strats = "rns,pns,hns,icpns";
  std::vector<std::string> compare_overrides;
  compare->add_option("--config", compare_config, "config JSON path")->required();
  compare->add_option("--strategies", compare_strats, "comma-separated strategy list");
  compare->add_option("overrides", compare_overrides, "key=value config overrides");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a bundle's test split");
  std::string eval_ckpt, eval_data;
  int eval_k = 10;
  eval->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
  eval->add_option("--data", eval_data, "bundle directory")->required();
  eval->add_option("--k", eval_k, "cutoff");

  // report
  auto* report = app.add_subcommand("report", "tabulate finished runs");
  std::vector<std::string> report_runs;
  std::string report_format = "markdown-table";
  report->add_option("--runs", report_runs, "run directories")->required()->expected(-1);
  report->add_option("--format", report_format, "output format");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (prep->parsed()) {
      int ku = prep_k_user >= 0 ? prep_k_user : prep_k;
      int ki = prep_k_item >= 0 ? prep_k_item : prep_k;
      return cmd_prep(prep_raw, prep_format, ku, ki, prep_seed, prep_out, prep_ratios, prep_lenient);
    }
    if (synth->parsed()) return cmd_synth(synth_cfg, synth_out);
    if (train->parsed()) return cmd_train(train_config, train_overrides);
    if (compare->parsed()) return cmd_compare(compare_config, compare_strats, compare_overrides);
    if (eval->parsed()) return cmd_eval(eval_ckpt, eval_data, eval_k);
    if (report->parsed()) return cmd_report(report_runs, report_format);
  } catch (const icpns::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
