#pragma once

#include "edgedist/gateway.hpp"
#include "edgedist/report.hpp"
#include "edgedist/scenario.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

namespace edgedist::harness {

struct RunOptions {
   std::optional<Mode> mode;
   std::optional<std::uint64_t> seed;
   /// Worker executable for socket mode; empty means default_worker_binary().
   std::filesystem::path worker_binary;
   /// Receives "<strategy>: <transition>" lines.
   std::function<void(const std::string&)> trace;
   std::chrono::milliseconds setup_timeout{10000};
   std::chrono::milliseconds request_timeout{120000};
};

/// $EDGEDIST_WORKER, else the build tree's worker, else `edgedist-worker`
/// next to the running executable.
std::filesystem::path default_worker_binary();

/// One fresh cluster per strategy. Throws SetupError or RuntimeError.
Report run_scenario(const Scenario& scenario, const RunOptions& options = {});
StrategyRun run_strategy(const Scenario& scenario, policy::Strategy strategy, const RunOptions& options = {});

} // namespace edgedist::harness
