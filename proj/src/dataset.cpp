#include "icpns/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "icpns/errors.hpp"
#include "json.hpp"

namespace icpns {

std::int32_t IdMaps::add_user(const std::string& id) {
  auto it = user_index.find(id);
  if (it != user_index.end()) return it->second;
  std::int32_t idx = n_users();
  user_ids.push_back(id);
  user_index.emplace(id, idx);
  return idx;
}

std::int32_t IdMaps::add_item(const std::string& id) {
  auto it = item_index.find(id);
  if (it != item_index.end()) return it->second;
  std::int32_t idx = n_items();
  item_ids.push_back(id);
  item_index.emplace(id, idx);
  return idx;
}

Interactions::Interactions(std::int32_t n_users, std::int32_t n_items,
                           std::vector<std::int64_t> offsets, std::vector<std::int32_t> items)
    : n_users_(n_users), n_items_(n_items), offsets_(std::move(offsets)), items_(std::move(items)) {
  if (offsets_.size() != static_cast<std::size_t>(n_users_) + 1)
    fail(ErrorCategory::validation, "offset array must have n_users+1 entries");
  if (offsets_.front() != 0 || offsets_.back() != static_cast<std::int64_t>(items_.size()))
    fail(ErrorCategory::validation, "offset array does not span the item buffer");
}

Interactions Interactions::from_pairs(std::int32_t n_users, std::int32_t n_items,
                                      std::span<const std::pair<std::int32_t, std::int32_t>> pairs) {
  std::vector<std::pair<std::int32_t, std::int32_t>> sorted(pairs.begin(), pairs.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::int64_t> offsets(static_cast<std::size_t>(n_users) + 1, 0);
  std::vector<std::int32_t> items;
  items.reserve(sorted.size());
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    auto [u, i] = sorted[k];
    if (u < 0 || u >= n_users || i < 0 || i >= n_items)
      fail(ErrorCategory::validation, "pair (" + std::to_string(u) + "," + std::to_string(i) + ") out of range");
    if (k > 0 && sorted[k] == sorted[k - 1])
      fail(ErrorCategory::validation, "duplicate pair (" + std::to_string(u) + "," + std::to_string(i) + ")");
    ++offsets[static_cast<std::size_t>(u) + 1];
    items.push_back(i);
  }
  for (std::size_t u = 0; u < static_cast<std::size_t>(n_users); ++u) offsets[u + 1] += offsets[u];
  return Interactions(n_users, n_items, std::move(offsets), std::move(items));
}

bool Interactions::has(std::int32_t u, std::int32_t i) const {
  auto row = items(u);
  return std::binary_search(row.begin(), row.end(), i);
}

std::vector<std::int64_t> Interactions::item_counts() const {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(n_items_), 0);
  for (std::int32_t i : items_) ++counts[static_cast<std::size_t>(i)];
  return counts;
}

std::vector<std::pair<std::int32_t, std::int32_t>> Interactions::to_pairs() const {
  std::vector<std::pair<std::int32_t, std::int32_t>> out;
  out.reserve(items_.size());
  for (std::int32_t u = 0; u < n_users_; ++u)
    for (std::int32_t i : items(u)) out.emplace_back(u, i);
  return out;
}

namespace {

void check_split(const Interactions& x, const char* name, std::int32_t n_users,
                 std::int32_t n_items, std::vector<Violation>& out) {
  if (x.n_users() != n_users || x.n_items() != n_items) {
    out.push_back({"shape", name, -1, -1,
                   "split shape (" + std::to_string(x.n_users()) + "," + std::to_string(x.n_items()) +
                       ") differs from bundle (" + std::to_string(n_users) + "," + std::to_string(n_items) + ")"});
    return;
  }
  for (std::int32_t u = 0; u < x.n_users(); ++u) {
    auto row = x.items(u);
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (row[k] < 0 || row[k] >= n_items) {
        out.push_back({"range", name, u, row[k], "item index out of range"});
        continue;
      }
      if (k > 0) {
        if (row[k] == row[k - 1])
          out.push_back({"duplicate", name, u, row[k], "repeated item in user list"});
        else if (row[k] < row[k - 1])
          out.push_back({"ordering", name, u, row[k], "user list not strictly increasing"});
      }
    }
  }
}

void check_overlap(const Interactions& a, const Interactions& b, const char* names,
                   std::vector<Violation>& out) {
  std::int32_t n = std::min(a.n_users(), b.n_users());
  for (std::int32_t u = 0; u < n; ++u) {
    auto ra = a.items(u);
    for (std::int32_t i : ra)
      if (b.has(u, i)) out.push_back({"overlap", names, u, i, "pair present in both splits"});
  }
}

}  // namespace

std::vector<Violation> validate_bundle(const DatasetBundle& bundle) {
  std::vector<Violation> out;
  std::int32_t n_users = bundle.maps.n_users();
  std::int32_t n_items = bundle.maps.n_items();

  if (bundle.maps.user_index.size() != bundle.maps.user_ids.size())
    out.push_back({"idmap", "users", -1, -1, "user id map is not a bijection"});
  if (bundle.maps.item_index.size() != bundle.maps.item_ids.size())
    out.push_back({"idmap", "items", -1, -1, "item id map is not a bijection"});
  for (std::int32_t u = 0; u < n_users; ++u) {
    auto it = bundle.maps.user_index.find(bundle.maps.user_ids[u]);
    if (it == bundle.maps.user_index.end() || it->second != u) {
      out.push_back({"idmap", "users", u, -1, "user id does not map back to its index"});
      break;
    }
  }
  for (std::int32_t i = 0; i < n_items; ++i) {
    auto it = bundle.maps.item_index.find(bundle.maps.item_ids[i]);
    if (it == bundle.maps.item_index.end() || it->second != i) {
      out.push_back({"idmap", "items", -1, i, "item id does not map back to its index"});
      break;
    }
  }

  check_split(bundle.train, "train", n_users, n_items, out);
  check_split(bundle.val, "val", n_users, n_items, out);
  check_split(bundle.test, "test", n_users, n_items, out);
  check_overlap(bundle.train, bundle.val, "train/val", out);
  check_overlap(bundle.train, bundle.test, "train/test", out);
  check_overlap(bundle.val, bundle.test, "val/test", out);

  double ratio_sum = bundle.split_ratios[0] + bundle.split_ratios[1] + bundle.split_ratios[2];
  if (std::abs(ratio_sum - 1.0) > 1e-9)
    out.push_back({"shape", "ratios", -1, -1, "split ratios do not sum to 1"});
  return out;
}

namespace {

void write_lines(const std::filesystem::path& p, const std::vector<std::string>& lines) {
  std::ofstream f(p, std::ios::binary);
  if (!f) fail(ErrorCategory::io, "cannot write " + p.string());
  for (const auto& l : lines) f << l << '\n';
}

void write_split(const std::filesystem::path& p, const Interactions& x) {
  std::ofstream f(p, std::ios::binary);
  if (!f) fail(ErrorCategory::io, "cannot write " + p.string());
  for (std::int32_t u = 0; u < x.n_users(); ++u)
    for (std::int32_t i : x.items(u)) f << u << '\t' << i << '\n';
}

Interactions read_split(const std::filesystem::path& p, std::int32_t n_users, std::int32_t n_items) {
  std::ifstream f(p, std::ios::binary);
  if (!f) fail(ErrorCategory::io, "cannot read " + p.string());
  std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      fail(ErrorCategory::parse, p.string() + ":" + std::to_string(lineno) + ": expected user<TAB>item");
    pairs.emplace_back(std::stoi(line.substr(0, tab)), std::stoi(line.substr(tab + 1)));
  }
  return Interactions::from_pairs(n_users, n_items, pairs);
}

}  // namespace

void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json header;
  header["format_version"] = 1;
  header["n_users"] = bundle.maps.n_users();
  header["n_items"] = bundle.maps.n_items();
  header["nnz"] = {{"train", bundle.train.nnz()}, {"val", bundle.val.nnz()}, {"test", bundle.test.nnz()}};
  header["split_seed"] = bundle.split_seed;
  header["split_ratios"] = bundle.split_ratios;
  {
    std::ofstream f(dir / "header.json", std::ios::binary);
    if (!f) fail(ErrorCategory::io, "cannot write " + (dir / "header.json").string());
    f << header.dump(2) << '\n';
  }
  write_lines(dir / "users.tsv", bundle.maps.user_ids);
  write_lines(dir / "items.tsv", bundle.maps.item_ids);
  write_split(dir / "train.tsv", bundle.train);
  write_split(dir / "val.tsv", bundle.val);
  write_split(dir / "test.tsv", bundle.test);
}

DatasetBundle load_bundle(const std::filesystem::path& dir) {
  std::ifstream hf(dir / "header.json", std::ios::binary);
  if (!hf) fail(ErrorCategory::io, "cannot read " + (dir / "header.json").string());
  nlohmann::json header;
  try {
    hf >> header;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::parse, "bad bundle header: " + std::string(e.what()));
  }
  DatasetBundle bundle;
  std::int32_t n_users = header.at("n_users").get<std::int32_t>();
  std::int32_t n_items = header.at("n_items").get<std::int32_t>();
  bundle.split_seed = header.at("split_seed").get<std::uint64_t>();
  auto ratios = header.at("split_ratios");
  for (int k = 0; k < 3; ++k) bundle.split_ratios[k] = ratios.at(k).get<double>();

  auto read_ids = [&](const char* file, auto add) {
    std::ifstream f(dir / file, std::ios::binary);
    if (!f) fail(ErrorCategory::io, "cannot read " + (dir / file).string());
    std::string line;
    while (std::getline(f, line)) add(line);
  };
  read_ids("users.tsv", [&](const std::string& id) { bundle.maps.add_user(id); });
  read_ids("items.tsv", [&](const std::string& id) { bundle.maps.add_item(id); });
  if (bundle.maps.n_users() != n_users || bundle.maps.n_items() != n_items)
    fail(ErrorCategory::parse, "bundle header counts disagree with id files");

  bundle.train = read_split(dir / "train.tsv", n_users, n_items);
  bundle.val = read_split(dir / "val.tsv", n_users, n_items);
  bundle.test = read_split(dir / "test.tsv", n_users, n_items);
  auto nnz = header.at("nnz");
  if (bundle.train.nnz() != nnz.at("train").get<std::int64_t>() ||
      bundle.val.nnz() != nnz.at("val").get<std::int64_t>() ||
      bundle.test.nnz() != nnz.at("test").get<std::int64_t>())
    fail(ErrorCategory::parse, "bundle header nnz disagrees with split files");
  return bundle;
}

}  // namespace icpns
