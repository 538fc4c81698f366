#include "edgedist/catalog_constants.hpp"
#include "edgedist/policy.hpp"

#include <cmath>
#include <map>

namespace edgedist::policy {
namespace {
//---------------------------------------------------------------------------
// Partial assignment of the first k nodes. Two partials with the same grid
// sum and the same deepest level receive identical suffixes, so only the one
// ranking ahead under the objective needs to be kept.
struct StateKey {
   std::int64_t units = 0;  // sum of throughput in grid units
   int deepest = 0;

   auto operator<=>(const StateKey&) const = default;
};
//---------------------------------------------------------------------------
struct Partial {
   double weighted = 0.0;  // sum of p_i * acc_i
   double deviation = 0.0;
   std::vector<int> levels;
};
//---------------------------------------------------------------------------
std::int64_t to_units(double perf) {
   return std::llround(perf / constants::kPerfResolution);
}
//---------------------------------------------------------------------------
Objective score(const StateKey& key, const Partial& p, double perf_req) {
   double total = static_cast<double>(key.units) * constants::kPerfResolution;
   Objective o;
   o.feasible = meets(total, perf_req);
   o.deepest_level = key.deepest;
   o.accuracy = p.weighted / total;
   o.deviation = p.deviation;
   o.levels = p.levels;
   return o;
}
//---------------------------------------------------------------------------
} // namespace
//---------------------------------------------------------------------------
DpSolution solve_dp(std::span<const double> board_req, const ProfilingTable& pruned, double perf_req) {
   const std::size_t n = pruned.nodes();
   const int deepest = pruned.catalog().deepest_level();
   if (board_req.size() != n)
      throw PolicyError("board requirement vector width differs from node count");

   std::map<StateKey, Partial> layer;
   layer.emplace(StateKey{}, Partial{});
   std::size_t states = 1;
   for (std::size_t node = 0; node < n; ++node) {
      std::map<StateKey, Partial> next;
      for (const auto& [key, partial] : layer) {
         // deepest row first, back-propagating towards level 0
         for (int level = deepest; level >= 0; --level) {
            double p = pruned.perf(level, node);
            StateKey k{key.units + to_units(p), std::max(key.deepest, level)};
            Partial cand{partial.weighted + p * pruned.catalog().accuracy(level), partial.deviation + std::abs(p - board_req[node]), partial.levels};
            cand.levels.push_back(level);
            auto [it, inserted] = next.try_emplace(k, cand);
            if (!inserted && compare(score(k, cand, perf_req), score(k, it->second, perf_req)) < 0)
               it->second = std::move(cand);
         }
      }
      layer = std::move(next);
      states += layer.size();
   }

   const std::pair<const StateKey, Partial>* best = nullptr;
   Objective best_score;
   for (const auto& entry : layer) {
      Objective s = score(entry.first, entry.second, perf_req);
      if (!best || compare(s, best_score) < 0) {
         best = &entry;
         best_score = std::move(s);
      }
   }

   DpSolution out;
   out.states = states;
   out.feasible = best_score.feasible;
   if (out.feasible)
      out.levels = best->second.levels;
   else
      out.levels.assign(n, deepest);
   for (std::size_t i = 0; i < n; ++i)
      out.perf_dist.push_back(pruned.perf(out.levels[i], i));
   return out;
}
//---------------------------------------------------------------------------
} // namespace edgedist::policy
