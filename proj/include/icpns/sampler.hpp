#pragma once

#include <cstdint>
#include <string>

#include "icpns/alias.hpp"
#include "icpns/community.hpp"
#include "icpns/dataset.hpp"
#include "icpns/encoder.hpp"
#include "icpns/rng.hpp"

namespace icpns {

enum class Strategy { rns, pns, hns, icpns };

Strategy parse_strategy(const std::string& name);
std::string to_string(Strategy s);

struct SamplerSpec {
  Strategy strategy = Strategy::rns;
  double alpha = 0.1;    // popularity smoothing exponent (pns, icpns)
  int candidates = 10;   // hardness candidate pool size s (hns)
  int retry_cap = 100;   // rejection attempts before the exact fallback
};

struct SamplerStats {
  std::int64_t draws = 0;
  std::int64_t rejections = 0;       // candidate hit the user's positive set
  std::int64_t exact_fallbacks = 0;  // rejection budget exhausted
  std::int64_t rns_fallbacks = 0;    // weighted table had no admissible mass
};

// Uniform over I \ I_u+ by rejection with an exact fallback; throws
// no_candidate when the user has interacted with every item.
std::int32_t sample_rns(std::int32_t u, const Interactions& train, Rng& rng,
                        int retry_cap = 100, SamplerStats* stats = nullptr);

// Global popularity table with counts^alpha weights, shared construction with
// the per-community tables.
CompactAlias build_global_table(const Interactions& train, double alpha);

std::int32_t sample_pns(std::int32_t u, const CompactAlias& table, const Interactions& train,
                        Rng& rng, int retry_cap = 100, SamplerStats* stats = nullptr);

// Draws `candidates` RNS candidates (with replacement, capped at the number
// of admissible items) and returns the one the model scores highest; ties go
// to the lowest item index.
std::int32_t sample_hns(std::int32_t u, const ScoreView& model, const Interactions& train,
                        int candidates, Rng& rng, int retry_cap = 100,
                        SamplerStats* stats = nullptr);

// In-community popularity sampling: the table of the user's community,
// restricted to I \ I_u+. Falls back to RNS (counted in stats) when the
// community has no admissible weighted item.
std::int32_t sample_icpns(std::int32_t u, const CommunityModel& model,
                          const Interactions& train, Rng& rng, int retry_cap = 100,
                          SamplerStats* stats = nullptr);

}  // namespace icpns
