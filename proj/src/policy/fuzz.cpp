#include "edgedist/catalog_constants.hpp"
#include "edgedist/policy_fuzz.hpp"

#include <random>
#include <sstream>

namespace edgedist::policy {
//---------------------------------------------------------------------------
PolicyInput generate_instance(std::uint64_t seed, std::size_t nodes, std::size_t levels) {
   std::mt19937_64 rng(seed);
   auto uniform_int = [&](std::int64_t lo, std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng); };
   auto uniform_real = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

   std::vector<std::vector<double>> rows(levels, std::vector<double>(nodes));
   std::vector<NodeId> ids;
   for (std::size_t c = 0; c < nodes; ++c) {
      ids.push_back(static_cast<NodeId>(c + 1));
      std::int64_t units = uniform_int(100, 3000);
      for (std::size_t l = 0; l < levels; ++l) {
         if (l > 0 && uniform_int(0, 4) != 0)
            units += uniform_int(0, units * 2 / 5);
         rows[l][c] = static_cast<double>(units) * constants::kPerfResolution;
      }
   }
   ProfilingTable table(default_catalog().truncated(levels), ids, rows);

   double perf_req = 0.0;
   switch (uniform_int(0, 9)) {
      case 0: perf_req = table.level_total(static_cast<int>(uniform_int(0, static_cast<std::int64_t>(levels) - 1))); break;
      case 1: {
         // exactly the sum of a random level vector
         for (std::size_t c = 0; c < nodes; ++c)
            perf_req += table.perf(static_cast<int>(uniform_int(0, static_cast<std::int64_t>(levels) - 1)), c);
         break;
      }
      default: perf_req = snap_perf(uniform_real(0.5 * table.level_total(0), 1.15 * table.level_total(static_cast<int>(levels) - 1)));
   }
   InferenceRequest request{seed, uniform_int(1, 1000), perf_req, uniform_real(0.83, constants::kMostAccurateTop5)};
   return {std::move(table), request};
}
//---------------------------------------------------------------------------
AgreementStats check_oracle_agreement(std::size_t nodes, std::size_t levels, std::size_t cases, std::uint64_t seed) {
   AgreementStats stats;
   std::seed_seq seq{seed, static_cast<std::uint64_t>(nodes), static_cast<std::uint64_t>(levels)};
   std::vector<std::uint64_t> seeds(cases);
   seq.generate(seeds.begin(), seeds.end());
   for (auto s : seeds) {
      auto input = generate_instance(s, nodes, levels);
      auto fast = dispatch_proportional(input);
      auto slow = oracle_exhaustive(input);
      ++stats.cases;
      if (!slow.objective.feasible)
         ++stats.infeasible;
      bool agree = fast.status == slow.status && fast.objective.levels == slow.objective.levels && same_value(fast.objective, slow.objective) &&
         fast.assignment == slow.assignment;
      if (agree) {
         ++stats.agreed;
      } else if (stats.first_mismatch.empty()) {
         std::ostringstream msg;
         msg << "seed " << s << ": dp status " << to_string(fast.status) << " vs oracle " << to_string(slow.status);
         stats.first_mismatch = msg.str();
      }
   }
   return stats;
}
//---------------------------------------------------------------------------
} // namespace edgedist::policy
