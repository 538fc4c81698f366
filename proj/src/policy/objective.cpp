#include "edgedist/policy.hpp"

#include <algorithm>
#include <cmath>

namespace edgedist::policy {
namespace {
//---------------------------------------------------------------------------
constexpr double kAccuracyTolerance = 1e-12;
constexpr double kDeviationTolerance = 1e-9;
//---------------------------------------------------------------------------
int compare_real(double a, double b, double tolerance) {
   double scale = std::max({1.0, std::abs(a), std::abs(b)});
   if (std::abs(a - b) <= tolerance * scale)
      return 0;
   return a < b ? -1 : 1;
}
//---------------------------------------------------------------------------
} // namespace
//---------------------------------------------------------------------------
std::string_view to_string(Status status) {
   switch (status) {
      case Status::Feasible: return "Feasible";
      case Status::PerfInfeasible: return "PerfInfeasible";
      case Status::AccInfeasible: return "AccInfeasible";
   }
   return "?";
}
//---------------------------------------------------------------------------
int compare(const Objective& a, const Objective& b) {
   if (a.feasible != b.feasible)
      return a.feasible ? -1 : 1;
   if (a.deepest_level != b.deepest_level)
      return a.deepest_level < b.deepest_level ? -1 : 1;
   if (int c = compare_real(a.accuracy, b.accuracy, kAccuracyTolerance))
      return -c;
   if (int c = compare_real(a.deviation, b.deviation, kDeviationTolerance))
      return c;
   if (a.levels != b.levels)
      return a.levels < b.levels ? -1 : 1;
   return 0;
}
//---------------------------------------------------------------------------
bool same_value(const Objective& a, const Objective& b) {
   return a.feasible == b.feasible && a.deepest_level == b.deepest_level &&
      compare_real(a.accuracy, b.accuracy, kAccuracyTolerance) == 0 &&
      compare_real(a.deviation, b.deviation, kDeviationTolerance) == 0;
}
//---------------------------------------------------------------------------
Objective evaluate(const ProfilingTable& table, std::span<const double> board_req, std::span<const int> levels, double perf_req) {
   if (levels.size() != table.nodes() || board_req.size() != table.nodes())
      throw PolicyError("level vector width differs from node count");
   Objective out;
   double total = 0.0;
   double weighted = 0.0;
   for (std::size_t i = 0; i < levels.size(); ++i) {
      double p = table.perf(levels[i], i);
      total += p;
      weighted += p * table.catalog().accuracy(levels[i]);
      out.deviation += std::abs(p - board_req[i]);
      out.deepest_level = std::max(out.deepest_level, levels[i]);
   }
   out.feasible = meets(total, perf_req);
   out.accuracy = weighted / total;
   out.levels.assign(levels.begin(), levels.end());
   return out;
}
//---------------------------------------------------------------------------
std::vector<double> board_requirements(const ProfilingTable& table, double perf_req) {
   double total = table.level_total(0);
   std::vector<double> out;
   for (std::size_t i = 0; i < table.nodes(); ++i)
      out.push_back(perf_req * table.perf(0, i) / total);
   return out;
}
//---------------------------------------------------------------------------
int stopping_index(const ProfilingTable& table, double perf_req) {
   for (int level = 0; level < static_cast<int>(table.levels()); ++level)
      if (meets(table.level_total(level), perf_req))
         return level;
   return table.catalog().deepest_level();
}
//---------------------------------------------------------------------------
ProfilingTable prune(const ProfilingTable& table, int index) {
   return table.with_levels(static_cast<std::size_t>(index) + 1);
}
//---------------------------------------------------------------------------
double bottleneck_throughput(const Assignment& assignment) {
   double slowest = 0.0;
   for (const auto& s : assignment.shares)
      if (s.images > 0)
         slowest = std::max(slowest, static_cast<double>(s.images) / s.predicted_perf);
   return slowest > 0.0 ? static_cast<double>(assignment.total_images()) / slowest : 0.0;
}
//---------------------------------------------------------------------------
} // namespace edgedist::policy
