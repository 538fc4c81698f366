#pragma once

#include "edgedist/proto.hpp"

#include <cstdint>
#include <random>
#include <string>

namespace edgedist::proto {

/// A valid message with every field drawn from its full legal range.
Message random_message(std::mt19937_64& rng);

struct RoundTripStats {
   std::size_t messages = 0;
   std::size_t failures = 0;
   std::size_t fragments = 0;
   std::string first_failure;
};

/// Encodes `count` random messages, checks decode(encode(m)) == m for each,
/// then replays the concatenated stream through a FrameDecoder cut at random
/// byte boundaries and checks the same sequence comes out.
RoundTripStats check_round_trips(std::size_t count, std::uint64_t seed);

} // namespace edgedist::proto
