#include <numeric>
#include <vector>

#include "doctest.h"
#include "icpns/alias.hpp"
#include "icpns/errors.hpp"
#include "icpns/rng.hpp"
#include "oracles.hpp"

using namespace icpns;

TEST_CASE("alias table reproduces hand-computed distributions") {
  // uniform
  AliasTable t1 = AliasTable::build(std::vector<double>{1, 1, 1, 1});
  for (double p : t1.reconstructed()) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));

  // 1:2:3
  AliasTable t2 = AliasTable::build(std::vector<double>{1, 2, 3});
  auto r2 = t2.reconstructed();
  CHECK(r2[0] == doctest::Approx(1.0 / 6).epsilon(1e-12));
  CHECK(r2[1] == doctest::Approx(2.0 / 6).epsilon(1e-12));
  CHECK(r2[2] == doctest::Approx(3.0 / 6).epsilon(1e-12));

  // zero-weight entry occupies a cell but gets no mass
  AliasTable t3 = AliasTable::build(std::vector<double>{0, 1, 1});
  auto r3 = t3.reconstructed();
  CHECK(r3[0] == doctest::Approx(0.0));
  CHECK(r3[1] == doctest::Approx(0.5).epsilon(1e-12));

  // singleton
  AliasTable t4 = AliasTable::build(std::vector<double>{7.0});
  CHECK(t4.reconstructed()[0] == doctest::Approx(1.0));
}

TEST_CASE("alias reconstruction matches normalized weights on random inputs") {
  Rng rng(123);
  for (int rep = 0; rep < 20; ++rep) {
    std::size_t n = 1 + rng.below(64);
    std::vector<double> w(n);
    for (auto& x : w) x = rng.real() < 0.2 ? 0.0 : rng.real() * 10;
    double sum = std::accumulate(w.begin(), w.end(), 0.0);
    if (sum <= 0) continue;
    AliasTable t = AliasTable::build(w);
    auto rec = t.reconstructed();
    for (std::size_t i = 0; i < n; ++i)
      CHECK(rec[i] == doctest::Approx(w[i] / sum).epsilon(1e-9));
  }
}

TEST_CASE("degenerate weights are rejected") {
  CHECK_THROWS_AS(AliasTable::build(std::vector<double>{}), Error);
  CHECK_THROWS_AS(AliasTable::build(std::vector<double>{0, 0, 0}), Error);
  CHECK_THROWS_AS(AliasTable::build(std::vector<double>{1, -2, 3}), Error);
}

TEST_CASE("draw frequencies converge to the target pmf") {
  std::vector<double> w{5, 1, 0, 3, 1};
  double sum = 10;
  AliasTable t = AliasTable::build(w);
  Rng rng(2024);
  const int n = 200000;
  std::vector<std::int64_t> counts(w.size(), 0);
  for (int k = 0; k < n; ++k) counts[t.draw(rng)] += 1;
  CHECK(counts[2] == 0);
  std::vector<double> emp(w.size()), tgt(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    emp[i] = static_cast<double>(counts[i]) / n;
    tgt[i] = w[i] / sum;
  }
  CHECK(oracle::tv_distance(emp, tgt) < 0.01);
}

TEST_CASE("compact alias drops zero mass and keeps original indices") {
  std::vector<std::pair<std::int32_t, double>> w{{3, 0.0}, {7, 2.0}, {11, 0.0}, {20, 6.0}};
  CompactAlias c = build_compact_alias(w);
  REQUIRE(c.has_mass());
  REQUIRE(c.items == std::vector<std::int32_t>{7, 20});
  CHECK(c.weights == std::vector<double>{2.0, 6.0});
  Rng rng(5);
  const int n = 100000;
  std::int64_t hi = 0;
  for (int k = 0; k < n; ++k) {
    std::int32_t i = c.draw(rng);
    CHECK((i == 7 || i == 20));
    hi += i == 20;
  }
  CHECK(std::abs(static_cast<double>(hi) / n - 0.75) < 0.01);

  CompactAlias empty = build_compact_alias(std::vector<std::pair<std::int32_t, double>>{{4, 0.0}});
  CHECK(!empty.has_mass());
}

TEST_CASE("draws are deterministic in the seed") {
  AliasTable t = AliasTable::build(std::vector<double>{1, 4, 2, 3});
  auto run = [&](std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::int32_t> out;
    for (int k = 0; k < 50; ++k) out.push_back(t.draw(rng));
    return out;
  };
  CHECK(run(9) == run(9));
  CHECK(run(9) != run(10));
}
