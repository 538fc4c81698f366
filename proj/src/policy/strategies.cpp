#include "edgedist/policy.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace edgedist::policy {
namespace {
//---------------------------------------------------------------------------
Assignment make_assignment(const ProfilingTable& table, std::span<const int> levels, std::span<const std::int64_t> images, const InferenceRequest& request) {
   Assignment a;
   for (std::size_t i = 0; i < table.nodes(); ++i)
      a.shares.push_back({table.node_ids()[i], images[i], levels[i], table.perf(levels[i], i)});
   a.predicted_weighted_accuracy = weighted_accuracy(a, table.catalog());
   a.feasible_acc = meets(a.predicted_weighted_accuracy, request.acc_req);
   return a;
}
//---------------------------------------------------------------------------
Status status_of(const Assignment& a) {
   if (!a.feasible_perf)
      return Status::PerfInfeasible;
   return a.feasible_acc ? Status::Feasible : Status::AccInfeasible;
}
//---------------------------------------------------------------------------
void check_input(const PolicyInput& input) {
   if (input.table.nodes() == 0)
      throw PolicyError("no available nodes");
   input.request.validate(input.table.catalog());
}
//---------------------------------------------------------------------------
// Completion of the level-selection strategies: split R proportional to the
// selected throughputs and predict the cluster rate as their sum.
PolicyOutput finish_selected(const PolicyInput& input, std::vector<int> levels, int stop) {
   const auto& table = input.table;
   std::vector<double> perf_dist;
   for (std::size_t i = 0; i < table.nodes(); ++i)
      perf_dist.push_back(table.perf(levels[i], i));
   auto images = apportion(input.request.batch_size, perf_dist);

   PolicyOutput out;
   out.assignment = make_assignment(table, levels, images, input.request);
   out.assignment.predicted_throughput = std::accumulate(perf_dist.begin(), perf_dist.end(), 0.0);
   out.assignment.feasible_perf = meets(out.assignment.predicted_throughput, input.request.perf_req);
   out.pruned_rows_used = stop;
   out.status = status_of(out.assignment);
   out.objective = evaluate(table, board_requirements(table, input.request.perf_req), levels, input.request.perf_req);
   return out;
}
//---------------------------------------------------------------------------
// Completion of the fixed-split baselines: throughput is bounded by the node
// that finishes its share last.
PolicyOutput finish_split(const PolicyInput& input, std::vector<int> levels, std::span<const std::int64_t> images) {
   const auto& table = input.table;
   PolicyOutput out;
   out.assignment = make_assignment(table, levels, images, input.request);
   out.assignment.predicted_throughput = bottleneck_throughput(out.assignment);
   out.assignment.feasible_perf = meets(out.assignment.predicted_throughput, input.request.perf_req);
   out.pruned_rows_used = stopping_index(table, input.request.perf_req);
   out.status = status_of(out.assignment);
   out.objective = evaluate(table, board_requirements(table, input.request.perf_req), levels, input.request.perf_req);
   return out;
}
//---------------------------------------------------------------------------
} // namespace
//---------------------------------------------------------------------------
PolicyOutput dispatch_proportional(const PolicyInput& input) {
   check_input(input);
   const double perf_req = input.request.perf_req;
   int stop = stopping_index(input.table, perf_req);
   ProfilingTable pruned = prune(input.table, stop);
   auto board_req = board_requirements(pruned, perf_req);
   DpSolution dp = solve_dp(board_req, pruned, perf_req);
   return finish_selected(input, std::move(dp.levels), stop);
}
//---------------------------------------------------------------------------
PolicyOutput dispatch_uniform(const PolicyInput& input) {
   check_input(input);
   auto images = split_evenly(input.request.batch_size, input.table.nodes());
   return finish_split(input, std::vector<int>(input.table.nodes(), 0), images);
}
//---------------------------------------------------------------------------
PolicyOutput dispatch_asymmetric(const PolicyInput& input) {
   check_input(input);
   auto images = apportion(input.request.batch_size, input.table.row(0));
   return finish_split(input, std::vector<int>(input.table.nodes(), 0), images);
}
//---------------------------------------------------------------------------
PolicyOutput dispatch_uniform_apx(const PolicyInput& input) {
   check_input(input);
   const auto& table = input.table;
   const auto n = static_cast<double>(table.nodes());
   int global = table.catalog().deepest_level();
   for (int level = 0; level < static_cast<int>(table.levels()); ++level) {
      auto row = table.row(level);
      if (meets(n * *std::min_element(row.begin(), row.end()), input.request.perf_req)) {
         global = level;
         break;
      }
   }
   auto images = split_evenly(input.request.batch_size, table.nodes());
   return finish_split(input, std::vector<int>(table.nodes(), global), images);
}
//---------------------------------------------------------------------------
PolicyOutput oracle_exhaustive(const PolicyInput& input) {
   check_input(input);
   const auto& table = input.table;
   const std::size_t n = table.nodes();
   const std::size_t m = table.levels();
   std::size_t space = 1;
   for (std::size_t i = 0; i < n; ++i) {
      if (space > kOracleLimit / m)
         throw PolicyError("oracle refuses: search space exceeds 1e7 level vectors");
      space *= m;
   }

   const double perf_req = input.request.perf_req;
   auto board_req = board_requirements(table, perf_req);
   std::vector<int> levels(n, 0);
   std::optional<Objective> best;
   for (std::size_t k = 0; k < space; ++k) {
      Objective o = evaluate(table, board_req, levels, perf_req);
      if (!best || compare(o, *best) < 0)
         best = std::move(o);
      for (std::size_t i = n; i-- > 0;) {
         if (++levels[i] < static_cast<int>(m))
            break;
         levels[i] = 0;
      }
   }

   std::vector<int> chosen = best->feasible ? best->levels : std::vector<int>(n, table.catalog().deepest_level());
   return finish_selected(input, std::move(chosen), stopping_index(table, perf_req));
}
//---------------------------------------------------------------------------
std::string_view to_string(Strategy strategy) {
   switch (strategy) {
      case Strategy::Proportional: return "proportional";
      case Strategy::Uniform: return "uniform";
      case Strategy::Asymmetric: return "asymmetric";
      case Strategy::UniformApx: return "uniform_apx";
   }
   return "?";
}
//---------------------------------------------------------------------------
std::optional<Strategy> parse_strategy(std::string_view name) {
   for (auto s : {Strategy::Proportional, Strategy::Uniform, Strategy::Asymmetric, Strategy::UniformApx})
      if (to_string(s) == name)
         return s;
   return std::nullopt;
}
//---------------------------------------------------------------------------
PolicyOutput dispatch(Strategy strategy, const PolicyInput& input) {
   switch (strategy) {
      case Strategy::Proportional: return dispatch_proportional(input);
      case Strategy::Uniform: return dispatch_uniform(input);
      case Strategy::Asymmetric: return dispatch_asymmetric(input);
      case Strategy::UniformApx: return dispatch_uniform_apx(input);
   }
   throw PolicyError("unknown strategy");
}
//---------------------------------------------------------------------------
} // namespace edgedist::policy
