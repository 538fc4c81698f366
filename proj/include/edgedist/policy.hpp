#pragma once

#include "edgedist/core.hpp"

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace edgedist::policy {

class PolicyError : public std::runtime_error {
 public:
   using std::runtime_error::runtime_error;
};

struct PolicyInput {
   ProfilingTable table;  // available nodes only
   InferenceRequest request;
};

enum class Status { Feasible, PerfInfeasible, AccInfeasible };

std::string_view to_string(Status status);

/// Score of one level vector under the dispatch objective. Candidates are
/// ranked lexicographically:
///   1. meets the performance requirement (sum of selected perf >= P)
///   2. shallowest deepest level (never approximate further than needed)
///   3. highest perf-weighted accuracy sum(p_i * acc_i) / sum(p_i)
///   4. smallest L1 distance to the per-board requirement vector
///   5. lexicographically smallest level vector
struct Objective {
   bool feasible = false;
   int deepest_level = 0;
   double accuracy = 0.0;
   double deviation = 0.0;
   std::vector<int> levels;
};

/// Negative if `a` ranks ahead of `b`, positive if behind, zero if tied.
int compare(const Objective& a, const Objective& b);
bool same_value(const Objective& a, const Objective& b);

/// Evaluates `levels` against `table` (one level per column).
Objective evaluate(const ProfilingTable& table, std::span<const double> board_req, std::span<const int> levels, double perf_req);

/// perf_req * row0[i] / sum(row0): the proportional per-board target.
std::vector<double> board_requirements(const ProfilingTable& table, double perf_req);

/// First level whose cluster total meets `perf_req`; the deepest level when none does.
int stopping_index(const ProfilingTable& table, double perf_req);

/// Drops every level below `index`.
ProfilingTable prune(const ProfilingTable& table, int index);

struct DpSolution {
   std::vector<double> perf_dist;
   std::vector<int> levels;
   bool feasible = false;
   /// Number of (node, partial sum, deepest level) states the solver kept.
   std::size_t states = 0;
};

/// Picks one level per column of `pruned` optimizing the dispatch objective.
/// Partial throughput sums are tracked on the 0.01 inferences/sec grid the
/// profiling table is stored on, so the search is exact for table values.
/// When no combination meets `perf_req` the all-deepest vector is returned
/// with `feasible == false`.
DpSolution solve_dp(std::span<const double> board_req, const ProfilingTable& pruned, double perf_req);

struct PolicyOutput {
   Assignment assignment;
   int pruned_rows_used = 0;
   Status status = Status::PerfInfeasible;
   Objective objective;
};

PolicyOutput dispatch_proportional(const PolicyInput& input);
PolicyOutput dispatch_uniform(const PolicyInput& input);
PolicyOutput dispatch_asymmetric(const PolicyInput& input);
PolicyOutput dispatch_uniform_apx(const PolicyInput& input);

/// Enumerates every level vector of the unpruned table. Refuses (PolicyError)
/// when the search space exceeds `kOracleLimit` vectors.
PolicyOutput oracle_exhaustive(const PolicyInput& input);
inline constexpr std::size_t kOracleLimit = 10'000'000;

enum class Strategy { Proportional, Uniform, Asymmetric, UniformApx };

std::string_view to_string(Strategy strategy);
std::optional<Strategy> parse_strategy(std::string_view name);
PolicyOutput dispatch(Strategy strategy, const PolicyInput& input);

/// Data-parallel completion model: R / max_i(w_i / p_i).
double bottleneck_throughput(const Assignment& assignment);

} // namespace edgedist::policy
