#pragma once

#include <cstdint>

namespace dismax::warnings {

// Process-wide counters for probability-floor clamps taken before
// logarithms. Training and loss evaluation are single-owner, so plain
// counters suffice.
std::uint64_t& probability_floor_clamps();  // cross-entropy path
std::uint64_t& kl_floor_clamps();           // KL regularizer path

}  // namespace dismax::warnings
