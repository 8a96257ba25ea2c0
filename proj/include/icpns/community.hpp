#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "icpns/alias.hpp"
#include "icpns/dataset.hpp"

namespace icpns {

struct ClusterResult {
  std::vector<std::int32_t> assignment;   // n entries in [0, p)
  std::vector<double> centroids;          // p x dim row-major
  std::vector<double> objective_trace;    // within-cluster sum of squares per iteration
  int iterations = 0;
};

// Lloyd's k-means with k-means++ seeding. Ties in the assignment step go to
// the lowest centroid index; an emptied cluster is reseeded to the point
// farthest from its current centroid. Converges when the largest centroid
// shift drops below tol. Ends with a final assignment pass, so the result is
// locally optimal wrt the returned centroids.
ClusterResult cluster_users(const double* points, std::int32_t n, int dim, std::int32_t p,
                            std::uint64_t seed, int max_iter = 100, double tol = 1e-6);

// Per-community item click counts v_p: counts[p][j] = |{u in C_p : x_uj = 1}|.
std::vector<std::vector<std::int64_t>> community_popularity(
    std::span<const std::int32_t> assignment, std::int32_t p, const Interactions& train);

// s_p = v_p ^ alpha elementwise with 0^alpha = 0; returned sparse, only
// positive entries, item indices ascending.
std::vector<std::pair<std::int32_t, double>> smooth_popularity(
    std::span<const std::int64_t> counts, double alpha);

// One alias table per community over its smoothed popularity; communities
// with no clicked items get a massless table (callers fall back to uniform).
std::vector<CompactAlias> build_community_tables(
    const std::vector<std::vector<std::pair<std::int32_t, double>>>& smoothed);

struct CommunityModel {
  std::int32_t n_communities = 0;
  int dim = 0;
  double alpha = 0.1;
  std::uint64_t seed = 0;
  std::vector<std::int32_t> assignment;
  std::vector<double> centroids;
  std::vector<std::vector<std::pair<std::int32_t, double>>> popularity;  // s_p rows
  std::vector<CompactAlias> tables;
};

// cluster -> count -> smooth -> tables, in one shot from user embeddings.
CommunityModel build_community_model(const double* user_emb, std::int32_t n_users, int dim,
                                     const Interactions& train, std::int32_t p, double alpha,
                                     std::uint64_t seed, int max_iter = 100, double tol = 1e-6);

// JSON on disk; alias tables are rebuilt deterministically on load.
void save_community_model(const CommunityModel& model, const std::filesystem::path& path);
CommunityModel load_community_model(const std::filesystem::path& path);

// "user<TAB>community" per line, for audits.
void export_assignment(const std::filesystem::path& path, std::span<const std::int32_t> assignment);

}  // namespace icpns
