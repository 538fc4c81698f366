#pragma once

#include "edgedist/harness.hpp"

#include <filesystem>
#include <random>

namespace edgedist::testing {

inline std::filesystem::path scenario_file(const std::string& name) {
   return std::filesystem::path(EDGEDIST_SCENARIO_DIR) / name;
}

/// Three or four boards; one drops part-way through its share of request 2.
/// Batch size, dropping node, fraction and jitter are drawn from `seed`.
inline harness::Scenario mid_request_disconnect(std::uint64_t seed) {
   std::mt19937_64 rng(seed);
   auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
   harness::Scenario s;
   s.name = "drop-" + std::to_string(seed);
   s.seed = seed;
   s.strategies = {static_cast<policy::Strategy>(pick(0, 3))};
   s.gateway = 1;
   s.nodes = {{1, "jetson", {20, 24, 30, 36, 44, 52}, 0.0},
              {2, "odroid1", {8, 10, 13, 16, 20, 25}, 0.0},
              {3, "rpi", {6, 8, 10, 13, 16, 20}, 0.0}};
   if (pick(0, 1))
      s.nodes.push_back({4, "odroid2", {8, 10, 13, 16, 20, 25}, 0.0});
   double cv = pick(0, 1) ? 0.05 : 0.0;
   for (auto& n : s.nodes)
      n.noise_cv = cv;
   std::int64_t batch = pick(50, 400);
   s.requests = {{1, 40, 30.0, 0.89}, {2, batch, 37.5, 0.89}, {3, 60, 30.0, 0.89}};
   auto victim = static_cast<NodeId>(pick(2, static_cast<int>(s.nodes.size())));
   s.events.push_back({victim, std::nullopt, RequestId{2}, std::uniform_real_distribution<double>(0.1, 0.9)(rng)});
   return s;
}

} // namespace edgedist::testing
