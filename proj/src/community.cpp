#include "icpns/community.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "icpns/errors.hpp"
#include "icpns/rng.hpp"
#include "json.hpp"

namespace icpns {

namespace {

double sqdist(const double* a, const double* b, int dim) {
  double s = 0.0;
  for (int k = 0; k < dim; ++k) {
    double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

// k-means++: first seed uniform, later seeds weighted by squared distance to
// the nearest chosen seed. Degenerate all-zero weights fall back to a uniform
// pick among unchosen points.
std::vector<std::int32_t> seed_centroids(const double* pts, std::int32_t n, int dim,
                                         std::int32_t p, Rng& rng) {
  std::vector<std::int32_t> chosen;
  std::vector<char> is_chosen(static_cast<std::size_t>(n), 0);
  std::vector<double> dist2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  chosen.push_back(static_cast<std::int32_t>(rng.below(static_cast<std::uint32_t>(n))));
  is_chosen[chosen.back()] = 1;
  while (static_cast<std::int32_t>(chosen.size()) < p) {
    const double* c = pts + static_cast<std::int64_t>(chosen.back()) * dim;
    double total = 0.0;
    for (std::int32_t x = 0; x < n; ++x) {
      if (is_chosen[x]) {
        dist2[x] = 0.0;
        continue;
      }
      dist2[x] = std::min(dist2[x], sqdist(pts + static_cast<std::int64_t>(x) * dim, c, dim));
      total += dist2[x];
    }
    std::int32_t pick = -1;
    if (total > 0.0) {
      double r = rng.real() * total;
      double acc = 0.0;
      for (std::int32_t x = 0; x < n; ++x) {
        if (is_chosen[x]) continue;
        acc += dist2[x];
        if (r < acc) {
          pick = x;
          break;
        }
      }
    }
    if (pick < 0) {  // all remaining points coincide with a centroid
      std::uint32_t skip = rng.below(static_cast<std::uint32_t>(n - chosen.size()));
      for (std::int32_t x = 0; x < n; ++x) {
        if (is_chosen[x]) continue;
        if (skip == 0) {
          pick = x;
          break;
        }
        --skip;
      }
    }
    chosen.push_back(pick);
    is_chosen[pick] = 1;
  }
  return chosen;
}

}  // namespace

ClusterResult cluster_users(const double* points, std::int32_t n, int dim, std::int32_t p,
                            std::uint64_t seed, int max_iter, double tol) {
  if (p < 1) fail(ErrorCategory::config, "community count must be positive");
  if (p > n)
    fail(ErrorCategory::config, "community count " + std::to_string(p) +
                                    " exceeds user count " + std::to_string(n));

  Rng rng = Rng::derive(seed, 0x6b6d6561ULL);  // clustering stream
  ClusterResult res;
  res.centroids.resize(static_cast<std::size_t>(p) * dim);
  for (std::int32_t c = 0; auto x : seed_centroids(points, n, dim, p, rng)) {
    std::copy_n(points + static_cast<std::int64_t>(x) * dim, dim,
                res.centroids.data() + static_cast<std::int64_t>(c) * dim);
    ++c;
  }
  res.assignment.assign(static_cast<std::size_t>(n), 0);
  std::vector<double> point_cost(static_cast<std::size_t>(n), 0.0);
  std::vector<std::int64_t> sizes(static_cast<std::size_t>(p), 0);

  auto assign_pass = [&](bool reseed_empty) {
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::int32_t x = 0; x < n; ++x) {
      const double* px = points + static_cast<std::int64_t>(x) * dim;
      double best = std::numeric_limits<double>::infinity();
      std::int32_t bc = 0;
      for (std::int32_t c = 0; c < p; ++c) {
        double d = sqdist(px, res.centroids.data() + static_cast<std::int64_t>(c) * dim, dim);
        if (d < best) {
          best = d;
          bc = c;
        }
      }
      res.assignment[x] = bc;
      point_cost[x] = best;
      ++sizes[bc];
    }
    if (reseed_empty) {
      for (std::int32_t c = 0; c < p; ++c) {
        if (sizes[c] > 0) continue;
        // steal the farthest point from a cluster that can spare one
        std::int32_t far = -1;
        double far_cost = -1.0;
        for (std::int32_t x = 0; x < n; ++x)
          if (sizes[res.assignment[x]] > 1 && point_cost[x] > far_cost) {
            far_cost = point_cost[x];
            far = x;
          }
        if (far < 0) continue;
        --sizes[res.assignment[far]];
        res.assignment[far] = c;
        sizes[c] = 1;
        std::copy_n(points + static_cast<std::int64_t>(far) * dim, dim,
                    res.centroids.data() + static_cast<std::int64_t>(c) * dim);
        point_cost[far] = 0.0;
      }
    }
    double obj = 0.0;
    for (double v : point_cost) obj += v;
    return obj;
  };

  std::vector<double> next(static_cast<std::size_t>(p) * dim);
  for (int it = 0; it < max_iter; ++it) {
    res.objective_trace.push_back(assign_pass(true));
    res.iterations = it + 1;
    std::fill(next.begin(), next.end(), 0.0);
    for (std::int32_t x = 0; x < n; ++x) {
      double* dst = next.data() + static_cast<std::int64_t>(res.assignment[x]) * dim;
      const double* px = points + static_cast<std::int64_t>(x) * dim;
      for (int k = 0; k < dim; ++k) dst[k] += px[k];
    }
    double shift = 0.0;
    for (std::int32_t c = 0; c < p; ++c) {
      double* dst = next.data() + static_cast<std::int64_t>(c) * dim;
      if (sizes[c] > 0)
        for (int k = 0; k < dim; ++k) dst[k] /= static_cast<double>(sizes[c]);
      else
        std::copy_n(res.centroids.data() + static_cast<std::int64_t>(c) * dim, dim, dst);
      shift = std::max(shift, std::sqrt(sqdist(
                                  dst, res.centroids.data() + static_cast<std::int64_t>(c) * dim, dim)));
    }
    res.centroids = next;
    if (shift < tol) break;
  }
  // align the returned assignment with the returned centroids
  assign_pass(false);
  return res;
}

std::vector<std::vector<std::int64_t>> community_popularity(
    std::span<const std::int32_t> assignment, std::int32_t p, const Interactions& train) {
  if (assignment.size() != static_cast<std::size_t>(train.n_users()))
    fail(ErrorCategory::validation, "assignment length does not match user count");
  std::vector<std::vector<std::int64_t>> counts(
      static_cast<std::size_t>(p), std::vector<std::int64_t>(static_cast<std::size_t>(train.n_items()), 0));
  for (std::int32_t u = 0; u < train.n_users(); ++u) {
    std::int32_t c = assignment[u];
    if (c < 0 || c >= p) fail(ErrorCategory::validation, "assignment value out of range");
    for (std::int32_t i : train.items(u)) ++counts[c][i];
  }
  return counts;
}

std::vector<std::pair<std::int32_t, double>> smooth_popularity(
    std::span<const std::int64_t> counts, double alpha) {
  if (alpha < 0.0 || alpha > 1.0) fail(ErrorCategory::config, "smoothing exponent must be in [0, 1]");
  std::vector<std::pair<std::int32_t, double>> out;
  for (std::size_t j = 0; j < counts.size(); ++j)
    if (counts[j] > 0)
      out.emplace_back(static_cast<std::int32_t>(j), std::pow(static_cast<double>(counts[j]), alpha));
  return out;
}

std::vector<CompactAlias> build_community_tables(
    const std::vector<std::vector<std::pair<std::int32_t, double>>>& smoothed) {
  std::vector<CompactAlias> tables;
  tables.reserve(smoothed.size());
  for (const auto& row : smoothed) tables.push_back(build_compact_alias(row));
  return tables;
}

CommunityModel build_community_model(const double* user_emb, std::int32_t n_users, int dim,
                                     const Interactions& train, std::int32_t p, double alpha,
                                     std::uint64_t seed, int max_iter, double tol) {
  CommunityModel m;
  m.n_communities = p;
  m.dim = dim;
  m.alpha = alpha;
  m.seed = seed;
  ClusterResult cl = cluster_users(user_emb, n_users, dim, p, seed, max_iter, tol);
  m.assignment = std::move(cl.assignment);
  m.centroids = std::move(cl.centroids);
  auto counts = community_popularity(m.assignment, p, train);
  m.popularity.reserve(static_cast<std::size_t>(p));
  for (const auto& row : counts) m.popularity.push_back(smooth_popularity(row, alpha));
  m.tables = build_community_tables(m.popularity);
  return m;
}

void save_community_model(const CommunityModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["n_communities"] = model.n_communities;
  j["dim"] = model.dim;
  j["alpha"] = model.alpha;
  j["seed"] = model.seed;
  j["assignment"] = model.assignment;
  j["centroids"] = model.centroids;
  nlohmann::json pop = nlohmann::json::array();
  for (const auto& row : model.popularity) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& [item, w] : row) r.push_back({item, w});
    pop.push_back(std::move(r));
  }
  j["popularity"] = std::move(pop);
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCategory::io, "cannot write " + path.string());
  f << j.dump(2) << '\n';
}

CommunityModel load_community_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCategory::io, "cannot read " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::parse, "bad community model: " + std::string(e.what()));
  }
  CommunityModel m;
  m.n_communities = j.at("n_communities").get<std::int32_t>();
  m.dim = j.at("dim").get<int>();
  m.alpha = j.at("alpha").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.assignment = j.at("assignment").get<std::vector<std::int32_t>>();
  m.centroids = j.at("centroids").get<std::vector<double>>();
  for (const auto& r : j.at("popularity")) {
    std::vector<std::pair<std::int32_t, double>> row;
    for (const auto& e : r) row.emplace_back(e.at(0).get<std::int32_t>(), e.at(1).get<double>());
    m.popularity.push_back(std::move(row));
  }
  if (m.popularity.size() != static_cast<std::size_t>(m.n_communities))
    fail(ErrorCategory::parse, "community model popularity rows do not match community count");
  m.tables = build_community_tables(m.popularity);
  return m;
}

void export_assignment(const std::filesystem::path& path, std::span<const std::int32_t> assignment) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCategory::io, "cannot write " + path.string());
  for (std::size_t u = 0; u < assignment.size(); ++u) f << u << '\t' << assignment[u] << '\n';
}

}  // namespace icpns
