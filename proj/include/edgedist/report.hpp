#pragma once

#include "edgedist/gateway.hpp"
#include "edgedist/policy.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace edgedist::harness {

inline constexpr const char* kCsvHeader = "strategy,request_id,batch,perf_req,acc_req,achieved_perf,achieved_acc,perf_viol,acc_viol";

struct StrategyRun {
   policy::Strategy strategy = policy::Strategy::Proportional;
   std::vector<InferenceRequest> requests;
   std::vector<RequestOutcome> outcomes;
   std::vector<RequestAudit> audits;
};

struct Report {
   std::string scenario;
   /// Which accuracy the acc_viol flags were judged on; achieved_acc shows it.
   AccuracyCheck accuracy_check = AccuracyCheck::Delivered;
   std::vector<StrategyRun> runs;
};

/// The accuracy figure `check` compares against the requirement.
double checked_accuracy(const RequestOutcome& outcome, AccuracyCheck check);

struct ViolationPct {
   double perf = 0.0;
   double acc = 0.0;
};

/// Share of execution time (makespan-weighted) spent on violating requests.
/// Throws InvalidArgument when the lists differ in length.
ViolationPct violation_pct(std::span<const RequestOutcome> outcomes, std::span<const InferenceRequest> requests);
/// Unweighted variant: share of requests that violate.
ViolationPct violation_count_pct(std::span<const RequestOutcome> outcomes, std::span<const InferenceRequest> requests);

struct StrategySummary {
   policy::Strategy strategy = policy::Strategy::Proportional;
   ViolationPct time_weighted;
   ViolationPct by_count;
   double mean_throughput = 0.0;
   double mean_accuracy = 0.0;
};

std::vector<StrategySummary> summarize(const Report& report);

void write_csv(const Report& report, std::ostream& out);
std::string csv_text(const Report& report);
/// Throws RuntimeError on I/O failure.
void emit_csv(const Report& report, const std::filesystem::path& path);
std::string emit_summary(const Report& report);

} // namespace edgedist::harness
