#include "icpns/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <unordered_map>

#include "icpns/errors.hpp"
#include "icpns/rng.hpp"

namespace icpns {

RawFormat parse_raw_format(const std::string& name) {
  if (name == "movielens-tab" || name == "movielens_tab") return RawFormat::movielens_tab;
  if (name == "movielens-colon" || name == "movielens_double_colon") return RawFormat::movielens_double_colon;
  if (name == "csv" || name == "generic-csv" || name == "generic_csv") return RawFormat::generic_csv;
  fail(ErrorCategory::config, "unknown raw format '" + name + "'");
}

std::string to_string(RawFormat f) {
  switch (f) {
    case RawFormat::movielens_tab: return "movielens-tab";
    case RawFormat::movielens_double_colon: return "movielens-colon";
    case RawFormat::generic_csv: return "csv";
  }
  return "?";
}

namespace {

std::vector<std::string> split_on(const std::string& line, const std::string& sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (;;) {
    std::size_t next = line.find(sep, pos);
    if (next == std::string::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + sep.size();
  }
}

bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e && !s.empty();
}

bool parse_record(const std::string& line, RawFormat format, RawRating& rec) {
  std::vector<std::string> fields;
  switch (format) {
    case RawFormat::movielens_tab: fields = split_on(line, "\t"); break;
    case RawFormat::movielens_double_colon: fields = split_on(line, "::"); break;
    case RawFormat::generic_csv: fields = split_on(line, ","); break;
  }
  if (fields.size() < 3 || fields.size() > 4) return false;
  if (fields[0].empty() || fields[1].empty()) return false;
  double rating;
  if (!parse_double(fields[2], rating)) return false;
  rec.user = fields[0];
  rec.item = fields[1];
  rec.rating = rating;
  rec.timestamp = 0;
  if (fields.size() == 4) {
    double ts;
    if (!parse_double(fields[3], ts)) return false;
    rec.timestamp = static_cast<std::int64_t>(ts);
  }
  return true;
}

}  // namespace

RawRatings load_raw(const std::filesystem::path& path, RawFormat format, bool strict) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCategory::io, "cannot read " + path.string());
  RawRatings out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    RawRating rec;
    if (parse_record(line, format, rec)) {
      out.records.push_back(std::move(rec));
      continue;
    }
    // a csv header line is tolerated once at the top
    if (format == RawFormat::generic_csv && lineno == 1) continue;
    if (strict)
      fail(ErrorCategory::parse, path.string() + ":" + std::to_string(lineno) + ": malformed record '" + line + "'");
    out.malformed.emplace_back(lineno, line);
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> binarize(const RawRatings& raw) {
  // last occurrence wins per (user, item); threshold at half the max rating
  std::unordered_map<std::string, double> final_rating;
  std::vector<std::pair<std::string, std::string>> order;
  double max_rating = 0.0;
  for (const auto& r : raw.records) max_rating = std::max(max_rating, r.rating);
  double threshold = 0.5 * max_rating;
  for (const auto& r : raw.records) {
    std::string key = r.user + '\t' + r.item;
    auto [it, inserted] = final_rating.try_emplace(key, r.rating);
    if (inserted)
      order.emplace_back(r.user, r.item);
    else
      it->second = r.rating;
  }
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(order.size());
  for (const auto& [user, item] : order) {
    if (final_rating[user + '\t' + item] >= threshold) out.emplace_back(user, item);
  }
  return out;
}

KcoreResult kcore_filter(std::span<const std::pair<std::string, std::string>> pairs,
                         int k_user, int k_item) {
  // index pairs for speed; the fixed point is order independent
  std::unordered_map<std::string, std::int32_t> umap, imap;
  std::vector<std::pair<std::int32_t, std::int32_t>> idx;
  idx.reserve(pairs.size());
  auto intern = [](std::unordered_map<std::string, std::int32_t>& m, const std::string& s) {
    return m.try_emplace(s, static_cast<std::int32_t>(m.size())).first->second;
  };
  for (const auto& [u, i] : pairs) idx.emplace_back(intern(umap, u), intern(imap, i));

  std::vector<std::int64_t> udeg(umap.size(), 0), ideg(imap.size(), 0);
  std::vector<char> alive(idx.size(), 1);
  for (const auto& [u, i] : idx) {
    ++udeg[u];
    ++ideg[i];
  }

  int iterations = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    ++iterations;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (!alive[k]) continue;
      auto [u, i] = idx[k];
      if (udeg[u] < k_user) {
        alive[k] = 0;
        --udeg[u];
        --ideg[i];
        changed = true;
      }
    }
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (!alive[k]) continue;
      auto [u, i] = idx[k];
      if (ideg[i] < k_item) {
        alive[k] = 0;
        --udeg[u];
        --ideg[i];
        changed = true;
      }
    }
  }

  KcoreResult out;
  out.iterations = iterations;
  for (std::size_t k = 0; k < idx.size(); ++k)
    if (alive[k]) out.pairs.push_back(pairs[k]);
  if (out.pairs.empty()) fail(ErrorCategory::empty_core, "k-core filter removed every interaction");
  return out;
}

DatasetBundle split(std::span<const std::pair<std::string, std::string>> pairs,
                    const std::array<double, 3>& ratios, std::uint64_t seed) {
  IdMaps maps;
  std::vector<std::pair<std::int32_t, std::int32_t>> idx;
  idx.reserve(pairs.size());
  for (const auto& [u, i] : pairs) idx.emplace_back(maps.add_user(u), maps.add_item(i));
  return split_indexed(std::move(maps), std::move(idx), ratios, seed);
}

DatasetBundle split_indexed(IdMaps maps,
                            std::vector<std::pair<std::int32_t, std::int32_t>> pairs,
                            const std::array<double, 3>& ratios, std::uint64_t seed) {
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) fail(ErrorCategory::config, "split ratios must sum to 1");
  for (double r : ratios)
    if (r < 0.0) fail(ErrorCategory::config, "split ratios must be non-negative");

  std::int64_t n = static_cast<std::int64_t>(pairs.size());
  // largest-remainder rounding of the three target sizes
  std::array<std::int64_t, 3> sizes;
  std::array<double, 3> frac;
  std::int64_t assigned = 0;
  for (int k = 0; k < 3; ++k) {
    double target = ratios[k] * static_cast<double>(n);
    sizes[k] = static_cast<std::int64_t>(target);
    frac[k] = target - static_cast<double>(sizes[k]);
    assigned += sizes[k];
  }
  std::array<int, 3> by_frac{0, 1, 2};
  std::stable_sort(by_frac.begin(), by_frac.end(), [&](int a, int b) { return frac[a] > frac[b]; });
  for (int k = 0; assigned < n; ++k, ++assigned) ++sizes[by_frac[k % 3]];

  Rng rng = Rng::derive(seed, 0x73706c6974ULL);  // split stream
  rng.shuffle(pairs);

  DatasetBundle bundle;
  std::int32_t n_users = maps.n_users();
  std::int32_t n_items = maps.n_items();
  bundle.maps = std::move(maps);
  bundle.split_seed = seed;
  bundle.split_ratios = ratios;
  auto make = [&](std::int64_t begin, std::int64_t count) {
    std::span<const std::pair<std::int32_t, std::int32_t>> s(pairs.data() + begin,
                                                             static_cast<std::size_t>(count));
    return Interactions::from_pairs(n_users, n_items, s);
  };
  bundle.train = make(0, sizes[0]);
  bundle.val = make(sizes[0], sizes[1]);
  bundle.test = make(sizes[0] + sizes[1], sizes[2]);
  return bundle;
}

bool ExposureLog::was_exposed(std::int32_t u, std::int32_t i) const {
  if (u < 0 || static_cast<std::size_t>(u) >= exposed.size()) return false;
  const auto& row = exposed[static_cast<std::size_t>(u)];
  return std::binary_search(row.begin(), row.end(), i);
}

SyntheticResult generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.n_users < 1 || cfg.n_items < 1) fail(ErrorCategory::config, "need at least one user and item");
  if (cfg.n_communities < 1) fail(ErrorCategory::config, "need at least one community");
  if (cfg.exposure_rate < 0.0 || cfg.exposure_rate > 1.0 || cfg.click_rate < 0.0 || cfg.click_rate > 1.0)
    fail(ErrorCategory::config, "rates must lie in [0, 1]");
  std::int32_t tail = cfg.n_items / 4;
  std::int32_t usable = cfg.n_items - tail;
  if (usable < cfg.n_communities)
    fail(ErrorCategory::config, "too many communities for the item count");

  // per-community block ranges over [0, usable)
  std::int32_t base = usable / cfg.n_communities;
  std::int32_t rem = usable % cfg.n_communities;
  auto block = [&](std::int32_t p) {
    std::int32_t lo = p * base + std::min(p, rem);
    std::int32_t hi = lo + base + (p < rem ? 1 : 0);
    return std::pair<std::int32_t, std::int32_t>(lo, hi);
  };

  Rng assign_rng = Rng::derive(cfg.seed, 0x636f6d6dULL);
  Rng expose_rng = Rng::derive(cfg.seed, 0x6578706fULL);

  ExposureLog log;
  log.exposed.resize(static_cast<std::size_t>(cfg.n_users));
  log.community.resize(static_cast<std::size_t>(cfg.n_users));
  std::vector<std::pair<std::int32_t, std::int32_t>> clicks;
  for (std::int32_t u = 0; u < cfg.n_users; ++u)
    log.community[u] = static_cast<std::int32_t>(assign_rng.below(static_cast<std::uint32_t>(cfg.n_communities)));
  for (std::int32_t u = 0; u < cfg.n_users; ++u) {
    auto [lo, hi] = block(log.community[u]);
    for (std::int32_t j = lo; j < hi; ++j) {
      if (expose_rng.real() < cfg.exposure_rate) {
        log.exposed[u].push_back(j);
        if (expose_rng.real() < cfg.click_rate) clicks.emplace_back(u, j);
      }
    }
    // the shared tail is seen occasionally but never clicked
    for (std::int32_t j = usable; j < cfg.n_items; ++j)
      if (expose_rng.real() < cfg.exposure_rate / 4.0) log.exposed[u].push_back(j);
  }
  if (clicks.empty()) fail(ErrorCategory::validation, "generator produced no interactions; raise the rates");

  IdMaps maps;
  for (std::int32_t u = 0; u < cfg.n_users; ++u) maps.add_user(std::to_string(u));
  for (std::int32_t i = 0; i < cfg.n_items; ++i) maps.add_item(std::to_string(i));

  SyntheticResult out;
  out.log = std::move(log);
  out.bundle = split_indexed(std::move(maps), std::move(clicks), cfg.ratios, cfg.seed);
  return out;
}

void save_exposure(const ExposureLog& log, const std::filesystem::path& file) {
  std::ofstream f(file, std::ios::binary);
  if (!f) fail(ErrorCategory::io, "cannot write " + file.string());
  for (std::size_t u = 0; u < log.exposed.size(); ++u) {
    f << u << '\t';
    const auto& row = log.exposed[u];
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) f << ',';
      f << row[k];
    }
    f << '\n';
  }
}

ExposureLog load_exposure(const std::filesystem::path& file) {
  std::ifstream f(file, std::ios::binary);
  if (!f) fail(ErrorCategory::io, "cannot read " + file.string());
  ExposureLog log;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      fail(ErrorCategory::parse, file.string() + ":" + std::to_string(lineno) + ": expected user<TAB>items");
    std::size_t u = static_cast<std::size_t>(std::stoll(line.substr(0, tab)));
    if (log.exposed.size() <= u) log.exposed.resize(u + 1);
    std::string rest = line.substr(tab + 1);
    if (!rest.empty())
      for (const auto& tok : split_on(rest, ","))
        log.exposed[u].push_back(static_cast<std::int32_t>(std::stol(tok)));
  }
  return log;
}

PrepStats prep_dataset(const std::filesystem::path& raw, RawFormat format, int k_user,
                       int k_item, const std::array<double, 3>& ratios, std::uint64_t seed,
                       const std::filesystem::path& out_dir, bool strict) {
  RawRatings ratings = load_raw(raw, format, strict);
  auto pairs = binarize(ratings);
  KcoreResult core = kcore_filter(pairs, k_user, k_item);
  DatasetBundle bundle = split(core.pairs, ratios, seed);
  save_bundle(bundle, out_dir);

  PrepStats stats;
  stats.raw_records = static_cast<std::int64_t>(ratings.records.size());
  stats.malformed_lines = static_cast<std::int64_t>(ratings.malformed.size());
  stats.binarized_pairs = static_cast<std::int64_t>(pairs.size());
  stats.kcore_iterations = core.iterations;
  stats.n_users = bundle.maps.n_users();
  stats.n_items = bundle.maps.n_items();
  stats.interactions = static_cast<std::int64_t>(core.pairs.size());
  return stats;
}

}  // namespace icpns
