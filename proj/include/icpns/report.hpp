#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace icpns {

// Report with volatile fields removed: timing and the output directory.
// Two runs with the same seeds must agree byte-for-byte on dump() of this
// form regardless of where their artifacts were written.
nlohmann::json canonical_report(const nlohmann::json& report);

// One comparison row per strategy entry of a run report.
struct ReportRow {
  std::string run;
  std::string strategy;
  double recall = 0.0;
  double ndcg = 0.0;
  double mrr = 0.0;
  double precision = 0.0;
  double mean_epoch_sec = 0.0;
};

std::vector<ReportRow> collect_rows(const nlohmann::json& report, const std::string& run_name);

// Strategy x metric grid. The per-metric best value is bolded, but only when
// more than one row competes.
std::string markdown_table(const std::vector<ReportRow>& rows);

// metrics.csv line per strategy; creates the header when the file is new.
void append_metrics_csv(const std::filesystem::path& path, const nlohmann::json& report,
                        const std::string& run_name);

void write_report_json(const std::filesystem::path& path, const nlohmann::json& report);
nlohmann::json read_report_json(const std::filesystem::path& path);

}  // namespace icpns
