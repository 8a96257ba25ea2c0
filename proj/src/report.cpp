#include "icpns/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "icpns/errors.hpp"

namespace icpns {

namespace {

bool is_volatile_key(const std::string& key) {
  return key == "wall_sec" || key == "mean_epoch_sec" || key == "total_sec";
}

void strip_volatile(nlohmann::json& j) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end();) {
      if (is_volatile_key(it.key()))
        it = j.erase(it);
      else {
        strip_volatile(it.value());
        ++it;
      }
    }
  } else if (j.is_array()) {
    for (auto& v : j) strip_volatile(v);
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << std::fixed << v;
  return os.str();
}

}  // namespace

nlohmann::json canonical_report(const nlohmann::json& report) {
  nlohmann::json out = report;
  strip_volatile(out);
  // the destination directory is not part of a run's identity (config_hash
  // skips it too)
  if (out.is_object() && out.contains("config") && out["config"].is_object())
    out["config"].erase("output");
  return out;
}

std::vector<ReportRow> collect_rows(const nlohmann::json& report, const std::string& run_name) {
  std::vector<ReportRow> rows;
  if (!report.contains("strategies")) return rows;
  for (const auto& s : report.at("strategies")) {
    ReportRow r;
    r.run = run_name;
    r.strategy = s.at("name").get<std::string>();
    const auto& t = s.at("test");
    r.recall = t.at("recall").get<double>();
    r.ndcg = t.at("ndcg").get<double>();
    r.mrr = t.at("mrr").get<double>();
    r.precision = t.at("precision").get<double>();
    if (s.contains("timing") && s.at("timing").contains("mean_epoch_sec"))
      r.mean_epoch_sec = s.at("timing").at("mean_epoch_sec").get<double>();
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string markdown_table(const std::vector<ReportRow>& rows) {
  auto metric = [](const ReportRow& r, int m) {
    switch (m) {
      case 0: return r.recall;
      case 1: return r.ndcg;
      case 2: return r.mrr;
      default: return r.precision;
    }
  };
  std::array<double, 4> best{};
  for (int m = 0; m < 4; ++m) {
    double b = -1.0;
    for (const auto& r : rows) b = std::max(b, metric(r, m));
    best[m] = b;
  }
  bool bold = rows.size() > 1;

  std::ostringstream os;
  os << "| run | strategy | recall | ndcg | mrr | precision | s/epoch |\n";
  os << "|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    os << "| " << r.run << " | " << r.strategy;
    for (int m = 0; m < 4; ++m) {
      double v = metric(r, m);
      bool mark = bold && v == best[m];
      os << " | " << (mark ? "**" : "") << fmt(v) << (mark ? "**" : "");
    }
    os << " | " << fmt(r.mean_epoch_sec) << " |\n";
  }
  return os.str();
}

void append_metrics_csv(const std::filesystem::path& path, const nlohmann::json& report,
                        const std::string& run_name) {
  bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream f(path, std::ios::binary | std::ios::app);
  if (!f) fail(ErrorCategory::io, "cannot write " + path.string());
  if (fresh) f << "run,backbone,strategy,k,n_users,recall,ndcg,mrr,precision\n";
  std::string backbone = report.at("config").at("model").at("backbone").get<std::string>();
  for (const auto& row : collect_rows(report, run_name)) {
    const auto& s = *std::find_if(report.at("strategies").begin(), report.at("strategies").end(),
                                  [&](const nlohmann::json& e) { return e.at("name") == row.strategy; });
    f << run_name << ',' << backbone << ',' << row.strategy << ','
      << s.at("test").at("k").get<int>() << ',' << s.at("test").at("n_users").get<std::int64_t>()
      << ',' << row.recall << ',' << row.ndcg << ',' << row.mrr << ',' << row.precision << '\n';
  }
}

void write_report_json(const std::filesystem::path& path, const nlohmann::json& report) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCategory::io, "cannot write " + path.string());
  f << report.dump(2) << '\n';
}

nlohmann::json read_report_json(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCategory::io, "cannot read " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::parse, path.string() + ": " + e.what());
  }
  return j;
}

}  // namespace icpns
