#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace icpns {

// Bidirectional mapping between external string ids and dense indices.
struct IdMaps {
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
  std::unordered_map<std::string, std::int32_t> user_index;
  std::unordered_map<std::string, std::int32_t> item_index;

  std::int32_t add_user(const std::string& id);
  std::int32_t add_item(const std::string& id);
  std::int32_t n_users() const { return static_cast<std::int32_t>(user_ids.size()); }
  std::int32_t n_items() const { return static_cast<std::int32_t>(item_ids.size()); }
};

// Immutable user->items adjacency in CSR form. Item lists are expected to be
// strictly increasing per user; that invariant is checked by validate_bundle,
// not by the constructor, so invalid instances can be built for testing.
class Interactions {
 public:
  Interactions() : n_users_(0), n_items_(0), offsets_{0} {}
  Interactions(std::int32_t n_users, std::int32_t n_items,
               std::vector<std::int64_t> offsets, std::vector<std::int32_t> items);

  // Sorts pairs by (user, item); throws on duplicates or out-of-range indices.
  static Interactions from_pairs(std::int32_t n_users, std::int32_t n_items,
                                 std::span<const std::pair<std::int32_t, std::int32_t>> pairs);

  std::int32_t n_users() const { return n_users_; }
  std::int32_t n_items() const { return n_items_; }
  std::int64_t nnz() const { return static_cast<std::int64_t>(items_.size()); }

  std::span<const std::int32_t> items(std::int32_t u) const {
    return {items_.data() + offsets_[u], items_.data() + offsets_[u + 1]};
  }
  std::int64_t degree(std::int32_t u) const { return offsets_[u + 1] - offsets_[u]; }

  // Membership query x_ui via binary search in u's list.
  bool has(std::int32_t u, std::int32_t i) const;

  std::vector<std::int64_t> item_counts() const;
  std::vector<std::pair<std::int32_t, std::int32_t>> to_pairs() const;

  const std::vector<std::int64_t>& offsets() const { return offsets_; }
  const std::vector<std::int32_t>& flat_items() const { return items_; }

 private:
  std::int32_t n_users_;
  std::int32_t n_items_;
  std::vector<std::int64_t> offsets_;  // size n_users_ + 1
  std::vector<std::int32_t> items_;
};

struct DatasetBundle {
  IdMaps maps;
  Interactions train;
  Interactions val;
  Interactions test;
  std::uint64_t split_seed = 0;
  std::array<double, 3> split_ratios{0.8, 0.1, 0.1};
};

struct Violation {
  std::string kind;        // "shape" | "range" | "ordering" | "duplicate" | "overlap" | "idmap"
  std::string where;       // which split / map
  std::int32_t user = -1;
  std::int32_t item = -1;
  std::string detail;
};

// Checks all bundle invariants and returns every violation found (empty when
// the bundle is well formed): consistent shapes, index ranges, strictly
// increasing item lists, pairwise disjoint splits, coherent id maps.
std::vector<Violation> validate_bundle(const DatasetBundle& bundle);

// Canonical on-disk form: header.json, users.tsv, items.tsv and one
// "<user>\t<item>" file per split sorted by (user, item). Round-trips byte
// identically.
void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir);
DatasetBundle load_bundle(const std::filesystem::path& dir);

}  // namespace icpns
