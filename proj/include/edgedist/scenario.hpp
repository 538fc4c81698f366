#pragma once

#include "edgedist/gateway.hpp"
#include "edgedist/policy.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace edgedist::harness {

enum class Mode { InProcess, Sockets };
std::string_view to_string(Mode mode);
std::optional<Mode> parse_mode(std::string_view text);

struct NodeSpec {
   NodeId id = 0;
   std::string name;
   std::vector<double> perf;
   double noise_cv = sim::kDefaultNoiseCv;
};

/// Either `after_request` (leave cleanly once that request completed) or
/// `request` + `at_fraction` (drop part-way through it).
struct DisconnectEvent {
   NodeId node = 0;
   std::optional<RequestId> after_request;
   std::optional<RequestId> request;
   double at_fraction = 0.0;
};

struct Scenario {
   std::string name;
   std::uint64_t seed = 0;
   Mode mode = Mode::InProcess;
   double time_scale = 100.0;
   AccuracyCheck accuracy_check = AccuracyCheck::Delivered;
   ModelCatalog catalog = default_catalog();
   std::vector<policy::Strategy> strategies;
   NodeId gateway = 0;
   std::vector<NodeSpec> nodes;
   std::vector<InferenceRequest> requests;
   std::vector<DisconnectEvent> events;

   /// Throws SetupError.
   void validate() const;
   const NodeSpec& node(NodeId id) const;
};

/// Throws SetupError with the source name and reason.
Scenario parse_scenario(std::string_view text, const std::string& source = "<scenario>");
Scenario load_scenario(const std::filesystem::path& path);

} // namespace edgedist::harness
