#pragma once

#include "edgedist/policy.hpp"

#include <cstdint>
#include <string>

namespace edgedist::policy {

/// Seeded random dispatch instance: n heterogeneous nodes, the first m levels
/// of the default catalog, perf entries on the 0.01 grid with occasional
/// plateaus, and a requirement that is sometimes exactly on a level total.
PolicyInput generate_instance(std::uint64_t seed, std::size_t nodes, std::size_t levels);

struct AgreementStats {
   std::size_t cases = 0;
   std::size_t agreed = 0;
   std::size_t infeasible = 0;  // instances where no vector met P
   std::string first_mismatch;
};

/// Runs dispatch_proportional against oracle_exhaustive on `cases` seeded
/// instances and compares status, level vector and objective value.
AgreementStats check_oracle_agreement(std::size_t nodes, std::size_t levels, std::size_t cases, std::uint64_t seed);

} // namespace edgedist::policy
