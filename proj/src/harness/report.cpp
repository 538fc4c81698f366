#include "edgedist/report.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <fstream>
#include <sstream>

namespace edgedist::harness {
namespace {
//---------------------------------------------------------------------------
void check_aligned(std::span<const RequestOutcome> outcomes, std::span<const InferenceRequest> requests) {
   if (outcomes.size() != requests.size())
      throw InvalidArgument(fmt::format("{} outcomes for {} requests", outcomes.size(), requests.size()));
}
//---------------------------------------------------------------------------
} // namespace
//---------------------------------------------------------------------------
double checked_accuracy(const RequestOutcome& outcome, AccuracyCheck check) {
   return check == AccuracyCheck::Delivered ? outcome.delivered_accuracy : outcome.empirical_top5;
}
//---------------------------------------------------------------------------
ViolationPct violation_pct(std::span<const RequestOutcome> outcomes, std::span<const InferenceRequest> requests) {
   check_aligned(outcomes, requests);
   double total = 0.0, perf = 0.0, acc = 0.0;
   for (const auto& o : outcomes) {
      total += o.makespan;
      perf += o.perf_violation ? o.makespan : 0.0;
      acc += o.acc_violation ? o.makespan : 0.0;
   }
   if (total <= 0.0)
      return {};
   return {100.0 * perf / total, 100.0 * acc / total};
}
//---------------------------------------------------------------------------
ViolationPct violation_count_pct(std::span<const RequestOutcome> outcomes, std::span<const InferenceRequest> requests) {
   check_aligned(outcomes, requests);
   if (outcomes.empty())
      return {};
   double perf = 0.0, acc = 0.0;
   for (const auto& o : outcomes) {
      perf += o.perf_violation;
      acc += o.acc_violation;
   }
   auto n = static_cast<double>(outcomes.size());
   return {100.0 * perf / n, 100.0 * acc / n};
}
//---------------------------------------------------------------------------
std::vector<StrategySummary> summarize(const Report& report) {
   std::vector<StrategySummary> out;
   for (const auto& run : report.runs) {
      StrategySummary s;
      s.strategy = run.strategy;
      s.time_weighted = violation_pct(run.outcomes, run.requests);
      s.by_count = violation_count_pct(run.outcomes, run.requests);
      for (const auto& o : run.outcomes) {
         s.mean_throughput += o.achieved_throughput;
         s.mean_accuracy += checked_accuracy(o, report.accuracy_check);
      }
      if (!run.outcomes.empty()) {
         s.mean_throughput /= static_cast<double>(run.outcomes.size());
         s.mean_accuracy /= static_cast<double>(run.outcomes.size());
      }
      out.push_back(s);
   }
   return out;
}
//---------------------------------------------------------------------------
void write_csv(const Report& report, std::ostream& out) {
   out << kCsvHeader << '\n';
   for (const auto& run : report.runs)
      for (std::size_t i = 0; i < run.outcomes.size(); ++i) {
         const auto& r = run.requests[i];
         const auto& o = run.outcomes[i];
         fmt::print(out, "{},{},{},{},{},{:.4f},{:.4f},{},{}\n", policy::to_string(run.strategy), r.id, r.batch_size, r.perf_req, r.acc_req,
                    o.achieved_throughput, checked_accuracy(o, report.accuracy_check), int{o.perf_violation}, int{o.acc_violation});
      }
}
//---------------------------------------------------------------------------
std::string csv_text(const Report& report) {
   std::ostringstream out;
   write_csv(report, out);
   return out.str();
}
//---------------------------------------------------------------------------
void emit_csv(const Report& report, const std::filesystem::path& path) {
   std::ofstream out(path, std::ios::binary);
   if (!out)
      throw RuntimeError("cannot write " + path.string());
   write_csv(report, out);
   out.flush();
   if (!out)
      throw RuntimeError("write to " + path.string() + " failed");
}
//---------------------------------------------------------------------------
std::string emit_summary(const Report& report) {
   std::string out = fmt::format("scenario: {}\n", report.scenario);
   out += fmt::format("{:<12} {:>9} {:>9} {:>9} {:>9} {:>10} {:>9}\n", "strategy", "perf_viol%", "acc_viol%", "perf_n%", "acc_n%", "mean_ips", "mean_acc");
   for (const auto& s : summarize(report))
      out += fmt::format("{:<12} {:>10.2f} {:>9.2f} {:>9.2f} {:>9.2f} {:>10.3f} {:>9.4f}\n", policy::to_string(s.strategy), s.time_weighted.perf,
                         s.time_weighted.acc, s.by_count.perf, s.by_count.acc, s.mean_throughput, s.mean_accuracy);
   return out;
}
//---------------------------------------------------------------------------
} // namespace edgedist::harness
