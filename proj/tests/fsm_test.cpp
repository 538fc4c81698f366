#include "doctest.h"

#include "edgedist/fsm.hpp"

#include <variant>

using namespace edgedist;
using namespace edgedist::fsm;

namespace {

constexpr NodeId kGateway = 1;

template <class T>
const T* find_action(const std::vector<GatewayAction>& actions) {
   for (const auto& a : actions)
      if (const auto* p = std::get_if<T>(&a))
         return p;
   return nullptr;
}

Assignment split(std::vector<NodeShare> shares) {
   Assignment a;
   a.shares = std::move(shares);
   return a;
}

GatewayMachine apply(GatewayMachine m, const Event& e) {
   return gateway_step(m, e).next;
}

// Gateway with itself and two local nodes, idle in NetCom.
GatewayMachine ready_gateway() {
   auto m = GatewayMachine::initial(kGateway);
   m = apply(m, event::ProfileReceived{2, {4, 8}});
   m = apply(m, event::ProfilingDone{kGateway, {10, 12}});
   m = apply(m, event::ProfileReceived{3, {6, 7}});
   return m;
}

InferenceRequest request(RequestId id, std::int64_t batch) {
   return {id, batch, 10.0, 0.85};
}

// Gateway after broadcasting a 100-image request split 50/30/20.
GatewayMachine broadcasting_gateway() {
   auto m = apply(ready_gateway(), event::WorkloadArrived{request(7, 100)});
   return apply(m, event::DistributionComputed{7, split({{kGateway, 50, 0, 10}, {2, 30, 1, 8}, {3, 20, 0, 6}})});
}

std::vector<Event> one_of_each_tag() {
   return {
      event::ProfilingDone{kGateway, {1, 2}},
      event::ProfileReceived{9, {1, 2}},
      event::WorkloadArrived{request(99, 10)},
      event::DistributionComputed{99, split({{kGateway, 10, 0, 1}})},
      event::BroadcastDone{},
      event::LocalInferenceDone{{99, kGateway, 0, 0, 0}},
      event::NodeDisconnected{3},
      event::AssignmentReceived{99, 5, 0, 1},
      event::ResultSent{},
      event::ResultReceived{{99, 2, 1, 1, 10}},
   };
}

} // namespace

TEST_CASE("gateway reaches NetCom after profiling") {
   auto m = ready_gateway();
   CHECK(m.state == GatewayState::NetCom);
   CHECK(m.members() == std::vector<NodeId>{1, 2, 3});
}

TEST_CASE("workload arrival moves NetCom to Distribute") {
   auto step = gateway_step(ready_gateway(), event::WorkloadArrived{request(1, 100)});
   CHECK(step.next.state == GatewayState::Distribute);
   const auto* compute = find_action<action::ComputeDistribution>(step.actions);
   REQUIRE(compute);
   CHECK(compute->request.batch_size == 100);
   CHECK(compute->nodes == std::vector<NodeId>{1, 2, 3});
   CHECK_FALSE(compute->redistribution);
}

TEST_CASE("distribution, broadcast, local inference, back to NetCom") {
   auto m = broadcasting_gateway();
   CHECK(m.state == GatewayState::NetCom);
   auto step = gateway_step(m, event::BroadcastDone{});
   CHECK(step.next.state == GatewayState::Inference);
   const auto* run = find_action<action::RunLocalInference>(step.actions);
   REQUIRE(run);
   CHECK(run->images == 50);
   CHECK(run->level == 0);

   auto done = gateway_step(step.next, event::LocalInferenceDone{{7, kGateway, 50, 46, 5000}});
   CHECK(done.next.state == GatewayState::NetCom);
   CHECK(done.actions.empty());
   CHECK(done.next.ctx.active->reported == 50);
}

TEST_CASE("request completes when every image is reported") {
   auto m = apply(broadcasting_gateway(), event::BroadcastDone{});
   m = apply(m, event::LocalInferenceDone{{7, kGateway, 50, 46, 5000}});
   m = apply(m, event::ResultReceived{{7, 2, 30, 27, 3750}});
   auto step = gateway_step(m, event::ResultReceived{{7, 3, 20, 18, 3333}});
   const auto* complete = find_action<action::CompleteRequest>(step.actions);
   REQUIRE(complete);
   CHECK(complete->request_id == 7);
   CHECK_FALSE(step.next.ctx.active.has_value());
}

TEST_CASE("over-reporting is a protocol violation") {
   auto m = apply(broadcasting_gateway(), event::BroadcastDone{});
   m = apply(m, event::LocalInferenceDone{{7, kGateway, 50, 46, 5000}});
   CHECK_THROWS_AS(gateway_step(m, event::ResultReceived{{7, 2, 31, 27, 3750}}), ProtocolViolation);
   CHECK_THROWS_AS(gateway_step(m, event::ResultReceived{{8, 2, 30, 27, 3750}}), ProtocolViolation);
}

TEST_CASE("disconnection mid-request redistributes only the orphaned images") {
   auto m = apply(broadcasting_gateway(), event::BroadcastDone{});
   m = apply(m, event::LocalInferenceDone{{7, kGateway, 50, 46, 5000}});
   m = apply(m, event::ResultReceived{{7, 3, 20, 18, 3333}});
   auto step = gateway_step(m, event::NodeDisconnected{2});
   CHECK(step.next.state == GatewayState::Distribute);
   const auto* compute = find_action<action::ComputeDistribution>(step.actions);
   REQUIRE(compute);
   CHECK(compute->request.batch_size == 30);
   CHECK(compute->redistribution);
   CHECK(compute->nodes == std::vector<NodeId>{1, 3});
   CHECK(find_action<action::UpdateProfilingTable>(step.actions)->perf.empty());

   // second round: the orphaned 30 go to the gateway and node 3
   m = apply(step.next, event::DistributionComputed{7, split({{kGateway, 18, 0, 10}, {3, 12, 0, 6}})});
   m = apply(m, event::BroadcastDone{});
   m = apply(m, event::LocalInferenceDone{{7, kGateway, 18, 17, 1800}});
   auto last = gateway_step(m, event::ResultReceived{{7, 3, 12, 11, 2000}});
   CHECK(find_action<action::CompleteRequest>(last.actions));
}

TEST_CASE("disconnection of an idle or finished node does not redistribute") {
   auto idle = gateway_step(ready_gateway(), event::NodeDisconnected{3});
   CHECK(idle.next.state == GatewayState::NetCom);
   CHECK(idle.next.members() == std::vector<NodeId>{1, 2});

   auto m = apply(broadcasting_gateway(), event::BroadcastDone{});
   m = apply(m, event::LocalInferenceDone{{7, kGateway, 50, 46, 5000}});
   m = apply(m, event::ResultReceived{{7, 3, 20, 18, 3333}});
   auto finished = gateway_step(m, event::NodeDisconnected{3});
   CHECK(finished.next.state == GatewayState::NetCom);
   CHECK_FALSE(find_action<action::ComputeDistribution>(finished.actions));

   auto unknown = gateway_step(ready_gateway(), event::NodeDisconnected{42});
   CHECK(unknown.actions.empty());
}

TEST_CASE("disconnection during local inference is handled after it") {
   auto m = apply(broadcasting_gateway(), event::BroadcastDone{});
   REQUIRE(m.state == GatewayState::Inference);
   auto deferred = gateway_step(m, event::NodeDisconnected{2});
   CHECK(deferred.next.state == GatewayState::Inference);
   CHECK(deferred.actions.empty());
   auto done = gateway_step(deferred.next, event::LocalInferenceDone{{7, kGateway, 50, 46, 5000}});
   CHECK(done.next.state == GatewayState::NetCom);
   const auto* replay = find_action<action::Redeliver>(done.actions);
   REQUIRE(replay);
   REQUIRE(std::holds_alternative<event::NodeDisconnected>(replay->event));
   auto redistribute = gateway_step(done.next, replay->event);
   CHECK(redistribute.next.state == GatewayState::Distribute);
   CHECK(find_action<action::ComputeDistribution>(redistribute.actions)->request.batch_size == 30);
}

TEST_CASE("queued requests start once the active one completes") {
   auto m = apply(broadcasting_gateway(), event::WorkloadArrived{request(8, 10)});
   CHECK(m.ctx.queue.size() == 1);
   m = apply(m, event::BroadcastDone{});
   m = apply(m, event::LocalInferenceDone{{7, kGateway, 50, 46, 5000}});
   m = apply(m, event::ResultReceived{{7, 2, 30, 27, 3750}});
   auto step = gateway_step(m, event::ResultReceived{{7, 3, 20, 18, 3333}});
   const auto* next = find_action<action::Redeliver>(step.actions);
   REQUIRE(next);
   auto start = gateway_step(step.next, next->event);
   CHECK(start.next.state == GatewayState::Distribute);
   CHECK(start.next.ctx.active->request.id == 8);
}

TEST_CASE("gateway reaches Inference within three transitions") {
   auto m = ready_gateway();
   m = apply(m, event::WorkloadArrived{request(1, 10)});
   m = apply(m, event::DistributionComputed{1, split({{kGateway, 10, 0, 10}})});
   m = apply(m, event::BroadcastDone{});
   CHECK(m.state == GatewayState::Inference);
}

TEST_CASE("illegal gateway events name state and event") {
   try {
      gateway_step(ready_gateway(), event::BroadcastDone{});
      FAIL("expected a protocol violation");
   } catch (const ProtocolViolation& v) {
      CHECK(v.state() == "NetCom");
      CHECK(v.event() == "BroadcastDone");
   }
   CHECK_THROWS_AS(gateway_step(ready_gateway(), event::AssignmentReceived{}), ProtocolViolation);
   CHECK_THROWS_AS(gateway_step(ready_gateway(), event::NodeDisconnected{kGateway}), ProtocolViolation);
   CHECK_THROWS_AS(gateway_step(GatewayMachine::initial(kGateway), event::WorkloadArrived{request(1, 1)}), ProtocolViolation);
}

TEST_CASE("worker state machine") {
   WorkerMachine w;
   auto profiled = worker_step(w, event::ProfilingDone{2, {4, 8}});
   CHECK(profiled.next.state == WorkerState::NetCom);
   REQUIRE(profiled.actions.size() == 1);
   CHECK(std::holds_alternative<action::SendProfile>(profiled.actions[0]));

   auto assigned = worker_step(profiled.next, event::AssignmentReceived{3, 40, 1, 77});
   CHECK(assigned.next.state == WorkerState::Inference);
   REQUIRE(std::holds_alternative<action::RunInference>(assigned.actions.at(0)));
   CHECK(std::get<action::RunInference>(assigned.actions[0]).seed == 77);

   CHECK_THROWS_AS(worker_step(assigned.next, event::AssignmentReceived{3, 40, 1, 77}), ProtocolViolation);

   auto finished = worker_step(assigned.next, event::LocalInferenceDone{{3, 2, 40, 37, 5000}});
   CHECK(finished.next.state == WorkerState::NetCom);
   CHECK(std::holds_alternative<action::SendResult>(finished.actions.at(0)));
   auto sent = worker_step(finished.next, event::ResultSent{});
   CHECK(sent.next.state == WorkerState::NetCom);
   CHECK_FALSE(sent.next.result_pending);
   CHECK_THROWS_AS(worker_step(sent.next, event::ResultSent{}), ProtocolViolation);

   auto lost = worker_step(sent.next, event::NodeDisconnected{1});
   CHECK(std::holds_alternative<action::Shutdown>(lost.actions.at(0)));
}

TEST_CASE("every (state, event) pair is a transition or a typed violation") {
   std::vector<GatewayMachine> gateways = {
      GatewayMachine::initial(kGateway),
      ready_gateway(),
      apply(ready_gateway(), event::WorkloadArrived{request(7, 100)}),
      apply(broadcasting_gateway(), event::BroadcastDone{}),
      broadcasting_gateway(),
   };
   CHECK(gateways[0].state == GatewayState::Profile);
   CHECK(gateways[2].state == GatewayState::Distribute);
   CHECK(gateways[3].state == GatewayState::Inference);
   std::size_t legal = 0, violations = 0;
   for (const auto& m : gateways)
      for (const auto& e : one_of_each_tag()) {
         try {
            auto a = gateway_step(m, e);
            auto b = gateway_step(m, e);
            CHECK(a.next.state == b.next.state);
            CHECK(a.actions.size() == b.actions.size());
            ++legal;
         } catch (const ProtocolViolation& v) {
            CHECK(v.state() == to_string(m.state));
            CHECK(v.event() == event_name(e));
            ++violations;
         }
      }
   CHECK(legal + violations == gateways.size() * std::variant_size_v<Event>);

   WorkerMachine profile;
   auto netcom = worker_step(profile, event::ProfilingDone{2, {1}}).next;
   auto inference = worker_step(netcom, event::AssignmentReceived{1, 1, 0, 0}).next;
   auto sending = worker_step(inference, event::LocalInferenceDone{{1, 2, 1, 1, 1}}).next;
   for (const auto& w : {profile, netcom, inference, sending})
      for (const auto& e : one_of_each_tag()) {
         try {
            worker_step(w, e);
         } catch (const ProtocolViolation& v) {
            CHECK(v.state() == to_string(w.state));
         }
      }
}
