#pragma once

#include "edgedist/core.hpp"

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

// Resource-manager state machines of the gateway (GN) and the local nodes
// (LN). Both are pure: a step maps (machine, event) to the next machine plus
// a list of actions, and the runtime performs the actions.
namespace edgedist::fsm {

namespace event {
struct ProfilingDone {
   NodeId node = 0;
   std::vector<double> perf;
};
struct ProfileReceived {
   NodeId node = 0;
   std::vector<double> perf;
};
struct WorkloadArrived {
   InferenceRequest request;
};
struct DistributionComputed {
   RequestId request_id = 0;
   Assignment assignment;
};
struct BroadcastDone {};
struct LocalInferenceDone {
   TaskResult result;
};
struct NodeDisconnected {
   NodeId node = 0;
};
struct AssignmentReceived {
   RequestId request_id = 0;
   std::int64_t images = 0;
   int level = 0;
   std::uint64_t seed = 0;
};
struct ResultSent {};
/// A local node's result reached the gateway.
struct ResultReceived {
   TaskResult result;
};
} // namespace event

using Event = std::variant<event::ProfilingDone, event::ProfileReceived, event::WorkloadArrived, event::DistributionComputed, event::BroadcastDone,
                           event::LocalInferenceDone, event::NodeDisconnected, event::AssignmentReceived, event::ResultSent, event::ResultReceived>;

std::string event_name(const Event& e);
std::string describe(const Event& e);

namespace action {
/// Run the dispatch strategy for `request` (whose batch is the number of
/// images still to place) over `nodes`.
struct ComputeDistribution {
   InferenceRequest request;
   std::vector<NodeId> nodes;
   bool redistribution = false;
};
struct Broadcast {
   RequestId request_id = 0;
   Assignment assignment;
};
struct RunLocalInference {
   RequestId request_id = 0;
   std::int64_t images = 0;
   int level = 0;
};
/// `perf` empty means the node left the cluster.
struct UpdateProfilingTable {
   NodeId node = 0;
   std::vector<double> perf;
};
struct CompleteRequest {
   RequestId request_id = 0;
};
/// Feed `event` back to the machine before any newer input.
struct Redeliver {
   Event event;
};
struct SendProfile {
   NodeId node = 0;
   std::vector<double> perf;
};
struct RunInference {
   RequestId request_id = 0;
   std::int64_t images = 0;
   int level = 0;
   std::uint64_t seed = 0;
};
struct SendResult {
   TaskResult result;
};
struct Shutdown {};
} // namespace action

using GatewayAction = std::variant<action::ComputeDistribution, action::Broadcast, action::RunLocalInference, action::UpdateProfilingTable,
                                   action::CompleteRequest, action::Redeliver>;
using WorkerAction = std::variant<action::SendProfile, action::RunInference, action::SendResult, action::Shutdown>;

std::string describe(const GatewayAction& a);
std::string describe(const WorkerAction& a);

/// Raised for an event that is not legal in the current state.
class ProtocolViolation : public std::logic_error {
 public:
   ProtocolViolation(std::string state, std::string event, std::string detail = {});
   const std::string& state() const { return state_; }
   const std::string& event() const { return event_; }

 private:
   std::string state_;
   std::string event_;
};

enum class GatewayState { Profile, NetCom, Distribute, Inference };
std::string to_string(GatewayState s);

struct ActiveRequest {
   InferenceRequest request;
   std::int64_t reported = 0;
   std::map<NodeId, std::int64_t> outstanding;  // assigned but not yet reported
};

struct GatewayContext {
   NodeId self = 0;
   std::map<NodeId, std::vector<double>> profiles;
   std::deque<InferenceRequest> queue;
   std::optional<ActiveRequest> active;
   std::vector<NodeId> deferred_disconnects;
   bool broadcast_pending = false;
   std::int64_t local_images = 0;
   int local_level = 0;
};

struct GatewayMachine {
   GatewayState state = GatewayState::Profile;
   GatewayContext ctx;

   static GatewayMachine initial(NodeId self);
   std::vector<NodeId> members() const;
};

struct GatewayStep {
   GatewayMachine next;
   std::vector<GatewayAction> actions;
};

/// Throws ProtocolViolation for an illegal (state, event) pair.
GatewayStep gateway_step(const GatewayMachine& machine, const Event& e);

enum class WorkerState { Profile, NetCom, Inference };
std::string to_string(WorkerState s);

struct WorkerMachine {
   WorkerState state = WorkerState::Profile;
   bool result_pending = false;
   std::optional<event::AssignmentReceived> current;
};

struct WorkerStep {
   WorkerMachine next;
   std::vector<WorkerAction> actions;
};

WorkerStep worker_step(const WorkerMachine& machine, const Event& e);

} // namespace edgedist::fsm
