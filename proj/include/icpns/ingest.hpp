#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "icpns/dataset.hpp"

namespace icpns {

enum class RawFormat { movielens_tab, movielens_double_colon, generic_csv };

RawFormat parse_raw_format(const std::string& name);
std::string to_string(RawFormat f);

struct RawRating {
  std::string user;
  std::string item;
  double rating = 0.0;
  std::int64_t timestamp = 0;
};

struct RawRatings {
  std::vector<RawRating> records;
  // (line number, content) of lines that failed to parse; only populated in
  // non-strict mode, strict mode throws on the first one.
  std::vector<std::pair<std::size_t, std::string>> malformed;
};

// movielens_tab:          user \t item \t rating \t timestamp
// movielens_double_colon: user::item::rating::timestamp
// generic_csv:            user,item,rating[,timestamp] with optional header
RawRatings load_raw(const std::filesystem::path& path, RawFormat format, bool strict = true);

// Keep interactions with rating >= 0.5 * max observed rating; on duplicate
// (user, item) records the last occurrence wins. Output keeps first-seen
// order of the surviving pairs.
std::vector<std::pair<std::string, std::string>> binarize(const RawRatings& raw);

struct KcoreResult {
  std::vector<std::pair<std::string, std::string>> pairs;
  int iterations = 0;  // passes until the fixed point
};

// Iteratively removes users with < k_user interactions and items with
// < k_item until a fixed point. Throws empty_core when nothing survives.
KcoreResult kcore_filter(std::span<const std::pair<std::string, std::string>> pairs,
                         int k_user, int k_item);

// Builds id maps in first-seen order, then splits the pair multiset into
// train/val/test by a seeded shuffle with largest-remainder size rounding.
DatasetBundle split(std::span<const std::pair<std::string, std::string>> pairs,
                    const std::array<double, 3>& ratios, std::uint64_t seed);

// Same split over pre-built maps and dense index pairs (used by the
// synthetic generator, whose id universe includes inactive users/items).
DatasetBundle split_indexed(IdMaps maps,
                            std::vector<std::pair<std::int32_t, std::int32_t>> pairs,
                            const std::array<double, 3>& ratios, std::uint64_t seed);

// Ground-truth exposure record from the synthetic generator: which items each
// user actually saw, and the generator's community label per user.
struct ExposureLog {
  std::vector<std::vector<std::int32_t>> exposed;  // sorted per user
  std::vector<std::int32_t> community;

  bool was_exposed(std::int32_t u, std::int32_t i) const;
};

struct SyntheticConfig {
  std::int32_t n_users = 400;
  std::int32_t n_items = 200;
  std::int32_t n_communities = 4;
  double exposure_rate = 0.5;
  double click_rate = 0.3;
  std::uint64_t seed = 0;
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
};

struct SyntheticResult {
  DatasetBundle bundle;
  ExposureLog log;
};

// Community-structured interaction generator. Items split into per-community
// blocks plus a shared tail (n_items/4). A user is exposed to items of their
// community's block at exposure_rate and to tail items at exposure_rate/4;
// exposed block items are clicked at click_rate. Clicks become interactions.
SyntheticResult generate_synthetic(const SyntheticConfig& cfg);

void save_exposure(const ExposureLog& log, const std::filesystem::path& file);
ExposureLog load_exposure(const std::filesystem::path& file);

struct PrepStats {
  std::int64_t raw_records = 0;
  std::int64_t malformed_lines = 0;
  std::int64_t binarized_pairs = 0;
  int kcore_iterations = 0;
  std::int32_t n_users = 0;
  std::int32_t n_items = 0;
  std::int64_t interactions = 0;
};

// Full ingestion: load -> binarize -> k-core -> split -> save_bundle(out_dir).
PrepStats prep_dataset(const std::filesystem::path& raw, RawFormat format, int k_user,
                       int k_item, const std::array<double, 3>& ratios, std::uint64_t seed,
                       const std::filesystem::path& out_dir, bool strict = true);

}  // namespace icpns
