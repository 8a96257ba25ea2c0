// End-to-end tests through the installed binary. The build passes the CLI
// path in ICPNS_CLI_PATH.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path work_root() {
  static fs::path root = [] {
    fs::path p = fs::temp_directory_path() / "icpns_cli_tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

RunResult run_cli(const std::string& args) {
  static int serial = 0;
  fs::path out = work_root() / ("stdout." + std::to_string(serial));
  fs::path err = work_root() / ("stderr." + std::to_string(serial));
  ++serial;
  std::string cmd = std::string(ICPNS_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  int rc = std::system(cmd.c_str());
  RunResult res;
  if (WIFEXITED(rc)) res.code = WEXITSTATUS(rc);
  auto slurp = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  res.out = slurp(out);
  res.err = slurp(err);
  return res;
}

void write_config(const fs::path& path, const fs::path& data, const fs::path& out_dir) {
  json cfg = {{"dataset", {{"path", data.string()}, {"format", "bundle"}}},
              {"split", {{"seed", 1}}},
              {"model",
               {{"backbone", "mf"}, {"dim", 8}, {"lr", 0.05}, {"init_scale", 0.1}, {"init_seed", 2}}},
              {"sampler", {{"seed", 3}}},
              {"community", {{"count", 2}, {"seed", 4}}},
              {"train",
               {{"batch_size", 128},
                {"stage1_epochs", 3},
                {"stage2_epochs", 3},
                {"patience", 2},
                {"stage1_eval_every", 2}}},
              {"eval", {{"k", 5}}},
              {"output", out_dir.string()}};
  std::ofstream f(path);
  f << cfg.dump(2) << '\n';
}

json read_json(const fs::path& p) {
  std::ifstream f(p);
  REQUIRE(f.good());
  json j;
  f >> j;
  return j;
}

}  // namespace

TEST_CASE("synth then train writes the full run directory") {
  fs::path data = work_root() / "bundle";
  RunResult synth = run_cli("synth --users 60 --items 24 --communities 3 --seed 9 --out " + data.string());
  CHECK(synth.code == 0);
  json sj = json::parse(synth.out);
  CHECK(sj.at("n_users") == 60);
  CHECK(fs::exists(data / "header.json"));
  CHECK(fs::exists(data / "exposure.tsv"));

  fs::path cfg = work_root() / "train.json";
  fs::path out = work_root() / "run1";
  write_config(cfg, data, out);
  RunResult train = run_cli("train --config " + cfg.string());
  CHECK(train.code == 0);
  CHECK(train.out.find("| run | strategy |") != std::string::npos);
  for (const char* name :
       {"config.resolved", "stage1.ckpt", "community.model", "stage2.best.ckpt", "trace.csv",
        "report.json", "metrics.csv"})
    CHECK(fs::exists(out / name));

  json rep = read_json(out / "report.json");
  CHECK(rep.at("strategies").at(0).at("name") == "icpns");
  CHECK(rep.at("dataset").at("n_users") == 60);

  // eval on the saved checkpoint reproduces the reported test metrics
  RunResult ev = run_cli("eval --ckpt " + (out / "stage2.best.ckpt").string() + " --data " +
                         data.string() + " --k 5");
  CHECK(ev.code == 0);
  json ej = json::parse(ev.out);
  double reported = rep.at("strategies").at(0).at("test").at("ndcg").get<double>();
  CHECK(ej.at("ndcg").get<double>() == doctest::Approx(reported).epsilon(1e-12));
  CHECK(ej.at("backbone") == "mf");

  // report verb tabulates the run
  RunResult tab = run_cli("report --runs " + out.string());
  CHECK(tab.code == 0);
  CHECK(tab.out.find("icpns") != std::string::npos);
  CHECK(tab.out.find("| run | strategy |") != std::string::npos);
}

TEST_CASE("compare covers the requested strategies") {
  fs::path data = work_root() / "bundle";
  REQUIRE(fs::exists(data / "header.json"));
  fs::path cfg = work_root() / "cmp.json";
  fs::path out = work_root() / "cmp_run";
  write_config(cfg, data, out);
  RunResult cmp = run_cli("compare --config " + cfg.string() +
                          " --strategies rns,icpns train.stage1_epochs=2 train.stage2_epochs=2");
  CHECK(cmp.code == 0);
  CHECK(cmp.out.find("rns") != std::string::npos);
  CHECK(cmp.out.find("icpns") != std::string::npos);
  CHECK(fs::exists(out / "rns" / "report.json"));
  CHECK(fs::exists(out / "icpns" / "report.json"));
  json rep = read_json(out / "report.json");
  CHECK(rep.at("strategies").size() == 2);
}

TEST_CASE("exit code 2 for config problems, 3 for data problems") {
  fs::path data = work_root() / "bundle";
  fs::path cfg = work_root() / "bad.json";
  write_config(cfg, data, work_root() / "bad_run");

  RunResult bad_alpha = run_cli("train --config " + cfg.string() + " sampler.stage2.alpha=1.5");
  CHECK(bad_alpha.code == 2);
  CHECK(bad_alpha.err.find("alpha") != std::string::npos);

  RunResult unknown_key = run_cli("train --config " + cfg.string() + " model.dims=8");
  CHECK(unknown_key.code == 2);

  RunResult missing_cfg = run_cli("train --config " + (work_root() / "nope.json").string());
  CHECK(missing_cfg.code == 3);

  fs::path gone_cfg = work_root() / "gone.json";
  write_config(gone_cfg, work_root() / "no_such_bundle", work_root() / "gone_run");
  RunResult missing_data = run_cli("train --config " + gone_cfg.string());
  CHECK(missing_data.code == 3);

  RunResult bad_sub = run_cli("frobnicate");
  CHECK(bad_sub.code == 2);
  RunResult no_req = run_cli("synth --users 5");
  CHECK(no_req.code == 2);
  RunResult bad_fmt = run_cli("report --runs x --format yaml");
  CHECK(bad_fmt.code == 2);
  RunResult bad_ckpt = run_cli("eval --ckpt missing.ckpt --data " + data.string());
  CHECK(bad_ckpt.code == 3);
}

TEST_CASE("prep then train matches inline raw ingestion") {
  // dense block so the 3-core keeps everything
  fs::path raw = work_root() / "raw.tsv";
  {
    std::ofstream f(raw);
    for (int u = 0; u < 30; ++u)
      for (int i = 0; i < 15; ++i)
        if ((u + 2 * i) % 3 != 0) f << "u" << u << '\t' << "i" << i << "\t5\t0\n";
  }
  fs::path bundle = work_root() / "prep_bundle";
  RunResult prep = run_cli("prep " + raw.string() + " --format movielens-tab --k 3 --seed 11 --out " +
                           bundle.string());
  CHECK(prep.code == 0);
  json pj = json::parse(prep.out);
  CHECK(pj.at("interactions").get<int>() > 0);

  fs::path cfg_a = work_root() / "a.json";
  fs::path out_a = work_root() / "run_a";
  write_config(cfg_a, bundle, out_a);
  CHECK(run_cli("train --config " + cfg_a.string()).code == 0);

  fs::path cfg_b = work_root() / "b.json";
  fs::path out_b = work_root() / "run_b";
  write_config(cfg_b, raw, out_b);
  CHECK(run_cli("train --config " + cfg_b.string() +
                " dataset.format=movielens-tab dataset.k_user=3 dataset.k_item=3 split.seed=11")
            .code == 0);

  json ra = read_json(out_a / "report.json");
  json rb = read_json(out_b / "report.json");
  // identical data and seeds -> identical training; only provenance differs
  json ca = ra.at("strategies");
  json cb = rb.at("strategies");
  // remove timing noise before comparing
  auto scrub = [](json& arr) {
    for (auto& s : arr) {
      s.erase("timing");
      for (auto& t : s.at("trace")) t.erase("wall_sec");
    }
  };
  scrub(ca);
  scrub(cb);
  CHECK(ca.dump() == cb.dump());
  CHECK(ra.at("stage1").at("best_val_ndcg") == rb.at("stage1").at("best_val_ndcg"));
}
