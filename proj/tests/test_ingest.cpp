#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "icpns/errors.hpp"
#include "icpns/ingest.hpp"
#include "icpns/rng.hpp"
#include "oracles.hpp"

using namespace icpns;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& content) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream f(p, std::ios::binary);
  f << content;
  return p;
}

}  // namespace

TEST_CASE("raw parsing handles the three formats") {
  auto tab = write_temp("icpns_tab.dat", "1\t2\t3\t100\n1\t5\t4\t101\n");
  auto r1 = load_raw(tab, RawFormat::movielens_tab);
  REQUIRE(r1.records.size() == 2);
  CHECK(r1.records[0].user == "1");
  CHECK(r1.records[0].item == "2");
  CHECK(r1.records[0].rating == 3.0);
  CHECK(r1.records[0].timestamp == 100);

  auto colon = write_temp("icpns_colon.dat", "7::9::5::1\n8::9::2::2\n");
  auto r2 = load_raw(colon, RawFormat::movielens_double_colon);
  REQUIRE(r2.records.size() == 2);
  CHECK(r2.records[1].user == "8");
  CHECK(r2.records[1].rating == 2.0);

  auto csv = write_temp("icpns_csv.dat", "user,item,rating\nA,B,4.5\nA,C,1.0,99\n");
  auto r3 = load_raw(csv, RawFormat::generic_csv);
  REQUIRE(r3.records.size() == 2);
  CHECK(r3.records[0].user == "A");
  CHECK(r3.records[0].rating == 4.5);
  CHECK(r3.records[1].timestamp == 99);
}

TEST_CASE("malformed lines abort in strict mode and are reported otherwise") {
  auto bad = write_temp("icpns_bad.dat", "1\t2\t3\t4\nnot-a-record\n5\t6\t1\t7\n");
  CHECK_THROWS_AS(load_raw(bad, RawFormat::movielens_tab, true), Error);
  auto r = load_raw(bad, RawFormat::movielens_tab, false);
  CHECK(r.records.size() == 2);
  REQUIRE(r.malformed.size() == 1);
  CHECK(r.malformed[0].first == 2);
}

TEST_CASE("empty input yields no records") {
  auto p = write_temp("icpns_empty.dat", "");
  CHECK(load_raw(p, RawFormat::movielens_tab).records.empty());
}

TEST_CASE("binarize keeps the upper half and the last duplicate wins") {
  RawRatings raw;
  auto add = [&](const char* u, const char* i, double r) {
    raw.records.push_back({u, i, r, 0});
  };
  add("u1", "a", 5);  // keep
  add("u1", "b", 2);  // drop (threshold 2.5)
  add("u2", "a", 3);  // later overwritten by a 1 -> drop
  add("u2", "b", 1);  // later overwritten by a 4 -> keep
  add("u2", "a", 1);
  add("u2", "b", 4);
  auto pairs = binarize(raw);
  std::set<std::pair<std::string, std::string>> got(pairs.begin(), pairs.end());
  CHECK(got == std::set<std::pair<std::string, std::string>>{{"u1", "a"}, {"u2", "b"}});
  // first-seen order of surviving keys
  CHECK(pairs[0] == std::pair<std::string, std::string>{"u1", "a"});
}

TEST_CASE("k-core keeps a complete block and drops a star") {
  // complete 3x3 block survives k=3; a star user with 3 leaf items does not
  std::vector<std::pair<std::string, std::string>> pairs;
  for (int u = 0; u < 3; ++u)
    for (int i = 0; i < 3; ++i) pairs.emplace_back("b" + std::to_string(u), "x" + std::to_string(i));
  pairs.emplace_back("star", "y0");
  pairs.emplace_back("star", "y1");
  pairs.emplace_back("star", "y2");
  auto out = kcore_filter(pairs, 3, 3);
  CHECK(out.pairs.size() == 9);
  for (const auto& [u, i] : out.pairs) CHECK(u != "star");
}

TEST_CASE("k-core is idempotent and matches the naive oracle") {
  Rng rng(77);
  for (int rep = 0; rep < 4; ++rep) {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (int u = 0; u < 30; ++u)
      for (int i = 0; i < 30; ++i)
        if (rng.real() < 0.12)
          pairs.emplace_back("u" + std::to_string(u), "i" + std::to_string(i));
    std::set<std::pair<std::string, std::string>> expect =
        oracle::kcore_naive({pairs.begin(), pairs.end()}, 3, 2);
    if (expect.empty()) {
      CHECK_THROWS_AS(kcore_filter(pairs, 3, 2), Error);
      continue;
    }
    auto out = kcore_filter(pairs, 3, 2);
    std::set<std::pair<std::string, std::string>> got(out.pairs.begin(), out.pairs.end());
    REQUIRE(got == expect);
    auto again = kcore_filter(out.pairs, 3, 2);
    std::set<std::pair<std::string, std::string>> got2(again.pairs.begin(), again.pairs.end());
    CHECK(got2 == expect);

    // scan order must not matter
    std::vector<std::pair<std::string, std::string>> shuffled = pairs;
    Rng srng(rep);
    srng.shuffle(shuffled);
    auto out3 = kcore_filter(shuffled, 3, 2);
    std::set<std::pair<std::string, std::string>> got3(out3.pairs.begin(), out3.pairs.end());
    CHECK(got3 == expect);
  }
}

TEST_CASE("k-core empty result throws") {
  std::vector<std::pair<std::string, std::string>> pairs{{"a", "x"}, {"b", "y"}};
  CHECK_THROWS_AS(kcore_filter(pairs, 5, 5), Error);
}

TEST_CASE("split sizes follow largest remainder and preserve the multiset") {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (int u = 0; u < 20; ++u)
    for (int i = 0; i < 10; ++i)
      pairs.emplace_back("u" + std::to_string(u), "i" + std::to_string(i));
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
  DatasetBundle b = split(pairs, ratios, 5);
  auto sizes = oracle::largest_remainder(static_cast<std::int64_t>(pairs.size()), ratios);
  CHECK(b.train.nnz() == sizes[0]);
  CHECK(b.val.nnz() == sizes[1]);
  CHECK(b.test.nnz() == sizes[2]);
  CHECK(validate_bundle(b).empty());

  // union of splits equals the input pairs exactly
  std::set<std::pair<std::int32_t, std::int32_t>> all;
  for (const auto& x : {b.train, b.val, b.test})
    for (auto pr : x.to_pairs()) CHECK(all.insert(pr).second);
  CHECK(all.size() == pairs.size());

  // awkward counts: 7 items at 0.5/0.25/0.25
  std::vector<std::pair<std::string, std::string>> odd;
  for (int i = 0; i < 7; ++i) odd.emplace_back("u", "i" + std::to_string(i));
  // user "u" has degree 7, items degree 1; sizes 3.5/1.75/1.75 -> 4/2/1 or 3/2/2
  std::array<double, 3> r2{0.5, 0.25, 0.25};
  DatasetBundle b2 = split(odd, r2, 1);
  auto s2 = oracle::largest_remainder(7, r2);
  CHECK(b2.train.nnz() == s2[0]);
  CHECK(b2.val.nnz() == s2[1]);
  CHECK(b2.test.nnz() == s2[2]);
  CHECK(b2.train.nnz() + b2.val.nnz() + b2.test.nnz() == 7);
}

TEST_CASE("split is deterministic in the seed") {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (int u = 0; u < 12; ++u)
    for (int i = 0; i < 6; ++i) pairs.emplace_back(std::to_string(u), std::to_string(i));
  DatasetBundle a = split(pairs, {0.8, 0.1, 0.1}, 42);
  DatasetBundle b = split(pairs, {0.8, 0.1, 0.1}, 42);
  DatasetBundle c = split(pairs, {0.8, 0.1, 0.1}, 43);
  CHECK(a.train.to_pairs() == b.train.to_pairs());
  CHECK(a.test.to_pairs() == b.test.to_pairs());
  CHECK(a.train.to_pairs() != c.train.to_pairs());
}

TEST_CASE("degenerate rates produce the exact block structure") {
  SyntheticConfig cfg;
  cfg.n_users = 40;
  cfg.n_items = 20;  // tail 5, usable 15
  cfg.n_communities = 3;
  cfg.exposure_rate = 1.0;
  cfg.click_rate = 1.0;
  cfg.seed = 11;
  SyntheticResult res = generate_synthetic(cfg);
  CHECK(validate_bundle(res.bundle).empty());
  // every user clicked exactly their block of 5 items, nothing else
  std::int64_t total = res.bundle.train.nnz() + res.bundle.val.nnz() + res.bundle.test.nnz();
  CHECK(total == 40 * 5);
  for (std::int32_t u = 0; u < cfg.n_users; ++u) {
    std::int32_t c = res.log.community[u];
    std::set<std::int32_t> items;
    for (const auto& x : {res.bundle.train, res.bundle.val, res.bundle.test})
      for (std::int32_t i : x.items(u)) items.insert(i);
    REQUIRE(items.size() == 5);
    for (std::int32_t i : items) {
      CHECK(i >= c * 5);
      CHECK(i < (c + 1) * 5);
    }
  }
}

TEST_CASE("zero click rate is rejected as empty") {
  SyntheticConfig cfg;
  cfg.n_users = 10;
  cfg.n_items = 12;
  cfg.n_communities = 2;
  cfg.click_rate = 0.0;
  cfg.seed = 1;
  CHECK_THROWS_AS(generate_synthetic(cfg), Error);
}

TEST_CASE("clicks are a subset of exposures and tail items are never clicked") {
  SyntheticConfig cfg;
  cfg.n_users = 100;
  cfg.n_items = 40;  // tail 10
  cfg.n_communities = 4;
  cfg.exposure_rate = 0.7;
  cfg.click_rate = 0.5;
  cfg.seed = 3;
  SyntheticResult res = generate_synthetic(cfg);
  std::int32_t usable = cfg.n_items - cfg.n_items / 4;
  bool tail_exposed = false;
  for (std::int32_t u = 0; u < cfg.n_users; ++u) {
    for (const auto& x : {res.bundle.train, res.bundle.val, res.bundle.test})
      for (std::int32_t i : x.items(u)) {
        CHECK(res.log.was_exposed(u, i));
        CHECK(i < usable);
      }
    for (std::int32_t i : res.log.exposed[u]) tail_exposed |= i >= usable;
  }
  CHECK(tail_exposed);
}

TEST_CASE("exposure counts match the rates within binomial noise") {
  SyntheticConfig cfg;
  cfg.n_users = 300;
  cfg.n_items = 40;  // blocks of 10, tail 10... usable 30
  cfg.n_communities = 3;
  cfg.exposure_rate = 0.6;
  cfg.click_rate = 0.4;
  cfg.seed = 17;
  SyntheticResult res = generate_synthetic(cfg);
  std::int32_t usable = cfg.n_items - cfg.n_items / 4;
  std::int32_t block = usable / cfg.n_communities;

  // in-block exposures: n_users * block trials at exposure_rate
  std::int64_t block_exposed = 0, tail_exposed = 0, clicks = 0;
  for (std::int32_t u = 0; u < cfg.n_users; ++u)
    for (std::int32_t i : res.log.exposed[u]) (i < usable ? block_exposed : tail_exposed) += 1;
  clicks = res.bundle.train.nnz() + res.bundle.val.nnz() + res.bundle.test.nnz();

  double n1 = static_cast<double>(cfg.n_users) * block;
  double m1 = n1 * cfg.exposure_rate, s1 = std::sqrt(n1 * cfg.exposure_rate * (1 - cfg.exposure_rate));
  CHECK(std::abs(block_exposed - m1) < 4 * s1);

  double n2 = static_cast<double>(cfg.n_users) * (cfg.n_items - usable);
  double p2 = cfg.exposure_rate / 4;
  CHECK(std::abs(tail_exposed - n2 * p2) < 4 * std::sqrt(n2 * p2 * (1 - p2)));

  double pc = cfg.exposure_rate * cfg.click_rate;
  CHECK(std::abs(static_cast<double>(clicks) - n1 * pc) < 4 * std::sqrt(n1 * pc * (1 - pc)));
}

TEST_CASE("exposure log serialization round trips") {
  namespace fs = std::filesystem;
  SyntheticConfig cfg;
  cfg.n_users = 25;
  cfg.n_items = 16;
  cfg.n_communities = 2;
  cfg.seed = 5;
  SyntheticResult res = generate_synthetic(cfg);
  auto p = fs::temp_directory_path() / "icpns_exposure.tsv";
  save_exposure(res.log, p);
  ExposureLog log = load_exposure(p);
  REQUIRE(log.exposed.size() == res.log.exposed.size());
  for (std::size_t u = 0; u < log.exposed.size(); ++u) CHECK(log.exposed[u] == res.log.exposed[u]);
  fs::remove(p);
}

TEST_CASE("prep writes a loadable bundle and reports stats") {
  namespace fs = std::filesystem;
  std::string raw;
  Rng rng(9);
  for (int u = 0; u < 25; ++u)
    for (int i = 0; i < 25; ++i)
      if (rng.real() < 0.4)
        raw += std::to_string(u) + "\t" + std::to_string(i) + "\t" +
               std::to_string(1 + static_cast<int>(rng.below(5))) + "\t0\n";
  auto rp = write_temp("icpns_prep_raw.dat", raw);
  fs::path out = fs::temp_directory_path() / "icpns_prep_bundle";
  fs::remove_all(out);
  PrepStats stats = prep_dataset(rp, RawFormat::movielens_tab, 3, 3, {0.8, 0.1, 0.1}, 21, out);
  CHECK(stats.raw_records > 0);
  CHECK(stats.interactions > 0);
  CHECK(stats.kcore_iterations >= 1);
  DatasetBundle b = load_bundle(out);
  CHECK(validate_bundle(b).empty());
  CHECK(b.train.nnz() + b.val.nnz() + b.test.nnz() == stats.interactions);
  CHECK(b.maps.n_users() == stats.n_users);
  fs::remove_all(out);
}
