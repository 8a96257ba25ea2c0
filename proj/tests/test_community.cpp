#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "doctest.h"
#include "icpns/community.hpp"
#include "icpns/errors.hpp"
#include "icpns/rng.hpp"
#include "oracles.hpp"

using namespace icpns;

namespace {

// three tight blobs in 2d, 8 points each
std::vector<double> blob_points(std::int32_t& n, int& dim, std::vector<int>* truth = nullptr) {
  n = 24;
  dim = 2;
  std::vector<std::pair<double, double>> centers{{0, 0}, {10, 0}, {0, 10}};
  std::vector<double> pts;
  Rng rng(55);
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < 8; ++k) {
      pts.push_back(centers[c].first + 0.3 * rng.normal());
      pts.push_back(centers[c].second + 0.3 * rng.normal());
      if (truth) truth->push_back(c);
    }
  return pts;
}

double wcss(const double* pts, std::int32_t n, int dim, const ClusterResult& r) {
  double s = 0;
  for (std::int32_t x = 0; x < n; ++x) {
    const double* p = pts + static_cast<std::int64_t>(x) * dim;
    const double* c = r.centroids.data() + static_cast<std::int64_t>(r.assignment[x]) * dim;
    for (int d = 0; d < dim; ++d) s += (p[d] - c[d]) * (p[d] - c[d]);
  }
  return s;
}

}  // namespace

TEST_CASE("k-means recovers well-separated blobs") {
  std::int32_t n;
  int dim;
  std::vector<int> truth;
  auto pts = blob_points(n, dim, &truth);
  ClusterResult r = cluster_users(pts.data(), n, dim, 3, 9);
  REQUIRE(r.assignment.size() == static_cast<std::size_t>(n));
  // same-blob points share a label, different blobs differ
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y)
      CHECK((r.assignment[x] == r.assignment[y]) == (truth[x] == truth[y]));
  // centroids sit near the blob centers
  std::set<std::pair<int, int>> found;
  for (int c = 0; c < 3; ++c)
    found.insert({static_cast<int>(std::round(r.centroids[c * 2])),
                  static_cast<int>(std::round(r.centroids[c * 2 + 1]))});
  CHECK(found == std::set<std::pair<int, int>>{{0, 0}, {10, 0}, {0, 10}});
}

TEST_CASE("k-means degenerate shapes") {
  std::int32_t n;
  int dim;
  auto pts = blob_points(n, dim);

  // p = 1: centroid is the mean, everyone in cluster 0
  ClusterResult one = cluster_users(pts.data(), n, dim, 1, 3);
  for (auto a : one.assignment) CHECK(a == 0);
  double mx = 0, my = 0;
  for (std::int32_t x = 0; x < n; ++x) {
    mx += pts[2 * x];
    my += pts[2 * x + 1];
  }
  CHECK(one.centroids[0] == doctest::Approx(mx / n).epsilon(1e-9));
  CHECK(one.centroids[1] == doctest::Approx(my / n).epsilon(1e-9));

  // p = n: every point its own cluster, zero objective
  ClusterResult all = cluster_users(pts.data(), n, dim, n, 3);
  std::set<std::int32_t> labels(all.assignment.begin(), all.assignment.end());
  CHECK(labels.size() == static_cast<std::size_t>(n));
  CHECK(wcss(pts.data(), n, dim, all) == doctest::Approx(0.0));

  CHECK_THROWS_AS(cluster_users(pts.data(), n, dim, 0, 1), Error);
  CHECK_THROWS_AS(cluster_users(pts.data(), n, dim, n + 1, 1), Error);
}

TEST_CASE("k-means objective never increases and the result is locally optimal") {
  Rng rng(1001);
  std::int32_t n = 60;
  int dim = 3;
  std::vector<double> pts(static_cast<std::size_t>(n) * dim);
  for (auto& v : pts) v = rng.normal();
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    ClusterResult r = cluster_users(pts.data(), n, dim, 5, seed);
    for (std::size_t t = 1; t < r.objective_trace.size(); ++t)
      CHECK(r.objective_trace[t] <= r.objective_trace[t - 1] + 1e-9);

    // every point is assigned to its nearest returned centroid (ties lowest)
    for (std::int32_t x = 0; x < n; ++x) {
      double best = 1e300;
      std::int32_t arg = -1;
      for (std::int32_t c = 0; c < 5; ++c) {
        double s = 0;
        for (int d = 0; d < dim; ++d) {
          double t = pts[x * dim + d] - r.centroids[c * dim + d];
          s += t * t;
        }
        if (s < best) {
          best = s;
          arg = c;
        }
      }
      CHECK(r.assignment[x] == arg);
    }
  }
}

TEST_CASE("k-means is deterministic in the seed") {
  Rng rng(7);
  std::int32_t n = 40;
  int dim = 2;
  std::vector<double> pts(static_cast<std::size_t>(n) * dim);
  for (auto& v : pts) v = rng.normal();
  ClusterResult a = cluster_users(pts.data(), n, dim, 4, 11);
  ClusterResult b = cluster_users(pts.data(), n, dim, 4, 11);
  CHECK(a.assignment == b.assignment);
  CHECK(a.centroids == b.centroids);
}

TEST_CASE("community popularity counts clicks per community") {
  // users 0,1 -> community 0; user 2 -> community 1
  std::vector<std::pair<std::int32_t, std::int32_t>> pairs{{0, 0}, {0, 1}, {1, 1}, {2, 1}, {2, 2}};
  Interactions train = Interactions::from_pairs(3, 4, pairs);
  std::vector<std::int32_t> assign{0, 0, 1};
  auto v = community_popularity(assign, 2, train);
  REQUIRE(v.size() == 2);
  CHECK(v[0] == std::vector<std::int64_t>{1, 2, 0, 0});
  CHECK(v[1] == std::vector<std::int64_t>{0, 1, 1, 0});

  // single community == global item counts
  auto g = community_popularity(std::vector<std::int32_t>(3, 0), 1, train);
  CHECK(g[0] == train.item_counts());
}

TEST_CASE("smoothing applies the exponent with zero preserved") {
  std::vector<std::int64_t> counts{0, 1, 8, 0, 27};
  auto s = smooth_popularity(counts, 1.0 / 3);
  REQUIRE(s.size() == 3);  // zeros dropped
  CHECK(s[0].first == 1);
  CHECK(s[0].second == doctest::Approx(1.0));
  CHECK(s[1].first == 2);
  CHECK(s[1].second == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(s[2].first == 4);
  CHECK(s[2].second == doctest::Approx(3.0).epsilon(1e-12));

  // alpha = 0 flattens every clicked item to weight 1
  auto flat = smooth_popularity(counts, 0.0);
  for (auto [i, w] : flat) CHECK(w == 1.0);
  // alpha = 1 keeps raw counts
  auto raw = smooth_popularity(counts, 1.0);
  CHECK(raw[2].second == 27.0);

  CHECK_THROWS_AS(smooth_popularity(counts, -0.1), Error);
  CHECK_THROWS_AS(smooth_popularity(counts, 1.5), Error);
}

TEST_CASE("community tables carry the smoothed mass and flag empty communities") {
  std::vector<std::vector<std::pair<std::int32_t, double>>> smoothed{
      {{0, 2.0}, {3, 6.0}},
      {},  // community with no clicks
  };
  auto tables = build_community_tables(smoothed);
  REQUIRE(tables.size() == 2);
  REQUIRE(tables[0].has_mass());
  CHECK(!tables[1].has_mass());
  Rng rng(3);
  int hi = 0;
  for (int k = 0; k < 40000; ++k) {
    auto i = tables[0].draw(rng);
    CHECK((i == 0 || i == 3));
    hi += i == 3;
  }
  CHECK(std::abs(hi / 40000.0 - 0.75) < 0.01);
}

TEST_CASE("community model assembles and round trips through disk") {
  namespace fs = std::filesystem;
  std::int32_t n;
  int dim;
  auto pts = blob_points(n, dim);
  // interactions aligned with the blobs: user u clicks items u%5 and 5+(u%3)
  std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
  for (std::int32_t u = 0; u < n; ++u) {
    pairs.emplace_back(u, u % 5);
    pairs.emplace_back(u, 5 + (u % 3));
  }
  Interactions train = Interactions::from_pairs(n, 8, pairs);
  CommunityModel m = build_community_model(pts.data(), n, dim, train, 3, 0.5, 13);
  CHECK(m.n_communities == 3);
  CHECK(m.alpha == 0.5);
  REQUIRE(m.assignment.size() == static_cast<std::size_t>(n));
  REQUIRE(m.tables.size() == 3);
  REQUIRE(m.popularity.size() == 3);

  // popularity rows agree with a direct recount
  auto counts = community_popularity(m.assignment, 3, train);
  for (int c = 0; c < 3; ++c) {
    auto expect = smooth_popularity(counts[c], 0.5);
    CHECK(m.popularity[c] == expect);
  }

  auto p = fs::temp_directory_path() / "icpns_comm.json";
  save_community_model(m, p);
  CommunityModel m2 = load_community_model(p);
  CHECK(m2.n_communities == m.n_communities);
  CHECK(m2.dim == m.dim);
  CHECK(m2.alpha == m.alpha);
  CHECK(m2.seed == m.seed);
  CHECK(m2.assignment == m.assignment);
  CHECK(m2.centroids == m.centroids);
  CHECK(m2.popularity == m.popularity);
  // rebuilt tables draw identically
  for (int c = 0; c < 3; ++c) {
    REQUIRE(m2.tables[c].has_mass() == m.tables[c].has_mass());
    if (!m.tables[c].has_mass()) continue;
    Rng r1(99), r2(99);
    for (int k = 0; k < 200; ++k) CHECK(m.tables[c].draw(r1) == m2.tables[c].draw(r2));
  }
  fs::remove(p);

  auto ap = fs::temp_directory_path() / "icpns_assign.tsv";
  export_assignment(ap, m.assignment);
  std::ifstream f(ap);
  std::string line;
  int rows = 0;
  while (std::getline(f, line)) ++rows;
  CHECK(rows == n);
  fs::remove(ap);
}
