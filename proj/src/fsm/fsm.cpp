#include "edgedist/fsm.hpp"

#include <algorithm>
#include <sstream>

namespace edgedist::fsm {
namespace {
//---------------------------------------------------------------------------
template <class... Ts>
struct Overloaded : Ts... {
   using Ts::operator()...;
};
//---------------------------------------------------------------------------
std::string join_perf(const std::vector<double>& perf) {
   std::ostringstream out;
   out << '[';
   for (std::size_t i = 0; i < perf.size(); ++i)
      out << (i ? "," : "") << perf[i];
   out << ']';
   return out.str();
}
//---------------------------------------------------------------------------
[[noreturn]] void illegal(GatewayState s, const Event& e, const std::string& detail = {}) {
   throw ProtocolViolation(to_string(s), event_name(e), detail);
}
//---------------------------------------------------------------------------
[[noreturn]] void illegal(WorkerState s, const Event& e, const std::string& detail = {}) {
   throw ProtocolViolation(to_string(s), event_name(e), detail);
}
//---------------------------------------------------------------------------
bool idle(const GatewayContext& ctx) {
   return !ctx.active && !ctx.broadcast_pending;
}
//---------------------------------------------------------------------------
// Books a result against the active request; emits CompleteRequest when the
// last image of the batch is accounted for.
void record_result(GatewayMachine& m, const TaskResult& r, const Event& e, std::vector<GatewayAction>& actions) {
   if (!m.ctx.active) {
      if (r.images_done == 0)
         return;
      illegal(m.state, e, "no request in flight");
   }
   auto& active = *m.ctx.active;
   if (r.request_id != active.request.id)
      illegal(m.state, e, "result for request " + std::to_string(r.request_id) + " while servicing " + std::to_string(active.request.id));
   auto it = active.outstanding.find(r.node);
   std::int64_t open = it == active.outstanding.end() ? 0 : it->second;
   if (r.images_done > open)
      illegal(m.state, e, "node " + std::to_string(r.node) + " reported " + std::to_string(r.images_done) + " images, " + std::to_string(open) + " outstanding");
   if (it != active.outstanding.end()) {
      it->second -= r.images_done;
      if (it->second == 0)
         active.outstanding.erase(it);
   }
   active.reported += r.images_done;
   if (active.reported == active.request.batch_size) {
      actions.push_back(action::CompleteRequest{active.request.id});
      m.ctx.active.reset();
   }
}
//---------------------------------------------------------------------------
// Entering NetCom: replay disconnections that arrived while busy, then start
// the next queued request if nothing is in flight.
void settle(GatewayMachine& m, std::vector<GatewayAction>& actions) {
   for (NodeId node : m.ctx.deferred_disconnects)
      actions.push_back(action::Redeliver{event::NodeDisconnected{node}});
   m.ctx.deferred_disconnects.clear();
   if (idle(m.ctx) && !m.ctx.queue.empty()) {
      actions.push_back(action::Redeliver{event::WorkloadArrived{m.ctx.queue.front()}});
      m.ctx.queue.pop_front();
   }
}
//---------------------------------------------------------------------------
// Events accepted while the gateway is busy computing, broadcasting or
// running its own share. Returns false if `e` is not one of them.
bool absorb_while_busy(GatewayMachine& m, const Event& e, std::vector<GatewayAction>& actions) {
   return std::visit(Overloaded{
                        [&](const event::ProfileReceived& ev) {
                           m.ctx.profiles[ev.node] = ev.perf;
                           actions.push_back(action::UpdateProfilingTable{ev.node, ev.perf});
                           return true;
                        },
                        [&](const event::WorkloadArrived& ev) {
                           m.ctx.queue.push_back(ev.request);
                           return true;
                        },
                        [&](const event::NodeDisconnected& ev) {
                           if (ev.node == m.ctx.self)
                              illegal(m.state, e, "gateway cannot disconnect from itself");
                           m.ctx.deferred_disconnects.push_back(ev.node);
                           return true;
                        },
                        [&](const event::ResultReceived& ev) {
                           record_result(m, ev.result, e, actions);
                           return true;
                        },
                        [](const auto&) { return false; },
                     },
                     e);
}
//---------------------------------------------------------------------------
void start_distribution(GatewayMachine& m, const InferenceRequest& request, bool redistribution, std::vector<GatewayAction>& actions) {
   m.state = GatewayState::Distribute;
   actions.push_back(action::ComputeDistribution{request, m.members(), redistribution});
}
//---------------------------------------------------------------------------
GatewayStep step_profile(GatewayMachine m, const Event& e) {
   std::vector<GatewayAction> actions;
   std::visit(Overloaded{
                 [&](const event::ProfilingDone& ev) {
                    if (ev.node != m.ctx.self)
                       illegal(m.state, e, "local profile for foreign node");
                    m.ctx.profiles[ev.node] = ev.perf;
                    actions.push_back(action::UpdateProfilingTable{ev.node, ev.perf});
                    m.state = GatewayState::NetCom;
                    settle(m, actions);
                 },
                 [&](const event::ProfileReceived& ev) {
                    m.ctx.profiles[ev.node] = ev.perf;
                    actions.push_back(action::UpdateProfilingTable{ev.node, ev.perf});
                 },
                 [&](const event::NodeDisconnected& ev) {
                    if (ev.node == m.ctx.self)
                       illegal(m.state, e, "gateway cannot disconnect from itself");
                    if (m.ctx.profiles.erase(ev.node))
                       actions.push_back(action::UpdateProfilingTable{ev.node, {}});
                 },
                 [&](const auto&) { illegal(m.state, e); },
              },
              e);
   return {std::move(m), std::move(actions)};
}
//---------------------------------------------------------------------------
GatewayStep step_netcom(GatewayMachine m, const Event& e) {
   std::vector<GatewayAction> actions;
   std::visit(Overloaded{
                 [&](const event::ProfileReceived& ev) {
                    m.ctx.profiles[ev.node] = ev.perf;
                    actions.push_back(action::UpdateProfilingTable{ev.node, ev.perf});
                 },
                 [&](const event::WorkloadArrived& ev) {
                    if (!idle(m.ctx)) {
                       m.ctx.queue.push_back(ev.request);
                       return;
                    }
                    m.ctx.active = ActiveRequest{ev.request, 0, {}};
                    start_distribution(m, ev.request, false, actions);
                 },
                 [&](const event::NodeDisconnected& ev) {
                    if (ev.node == m.ctx.self)
                       illegal(m.state, e, "gateway cannot disconnect from itself");
                    if (m.ctx.broadcast_pending) {
                       m.ctx.deferred_disconnects.push_back(ev.node);
                       return;
                    }
                    if (!m.ctx.profiles.erase(ev.node))
                       return;
                    actions.push_back(action::UpdateProfilingTable{ev.node, {}});
                    if (!m.ctx.active)
                       return;
                    auto& active = *m.ctx.active;
                    auto it = active.outstanding.find(ev.node);
                    if (it == active.outstanding.end())
                       return;
                    InferenceRequest remainder = active.request;
                    remainder.batch_size = it->second;
                    active.outstanding.erase(it);
                    start_distribution(m, remainder, true, actions);
                 },
                 [&](const event::ResultReceived& ev) {
                    record_result(m, ev.result, e, actions);
                    settle(m, actions);
                 },
                 [&](const event::BroadcastDone&) {
                    if (!m.ctx.broadcast_pending)
                       illegal(m.state, e, "no broadcast in progress");
                    m.ctx.broadcast_pending = false;
                    m.state = GatewayState::Inference;
                    actions.push_back(action::RunLocalInference{m.ctx.active ? m.ctx.active->request.id : 0, m.ctx.local_images, m.ctx.local_level});
                 },
                 [&](const auto&) { illegal(m.state, e); },
              },
              e);
   return {std::move(m), std::move(actions)};
}
//---------------------------------------------------------------------------
GatewayStep step_distribute(GatewayMachine m, const Event& e) {
   std::vector<GatewayAction> actions;
   if (const auto* ev = std::get_if<event::DistributionComputed>(&e)) {
      if (!m.ctx.active || m.ctx.active->request.id != ev->request_id)
         illegal(m.state, e, "distribution for a request that is not in flight");
      auto& active = *m.ctx.active;
      m.ctx.local_images = 0;
      m.ctx.local_level = 0;
      for (const auto& share : ev->assignment.shares) {
         if (!m.ctx.profiles.contains(share.node))
            illegal(m.state, e, "distribution targets unknown node " + std::to_string(share.node));
         if (share.images > 0)
            active.outstanding[share.node] += share.images;
         if (share.node == m.ctx.self) {
            m.ctx.local_images = share.images;
            m.ctx.local_level = share.level;
         }
      }
      m.ctx.broadcast_pending = true;
      m.state = GatewayState::NetCom;
      actions.push_back(action::Broadcast{ev->request_id, ev->assignment});
      return {std::move(m), std::move(actions)};
   }
   if (!absorb_while_busy(m, e, actions))
      illegal(m.state, e);
   return {std::move(m), std::move(actions)};
}
//---------------------------------------------------------------------------
GatewayStep step_inference(GatewayMachine m, const Event& e) {
   std::vector<GatewayAction> actions;
   if (const auto* ev = std::get_if<event::LocalInferenceDone>(&e)) {
      if (ev->result.node != m.ctx.self)
         illegal(m.state, e, "local result from foreign node");
      record_result(m, ev->result, e, actions);
      m.ctx.local_images = 0;
      m.state = GatewayState::NetCom;
      settle(m, actions);
      return {std::move(m), std::move(actions)};
   }
   if (!absorb_while_busy(m, e, actions))
      illegal(m.state, e);
   return {std::move(m), std::move(actions)};
}
//---------------------------------------------------------------------------
} // namespace
//---------------------------------------------------------------------------
ProtocolViolation::ProtocolViolation(std::string state, std::string event, std::string detail)
   : std::logic_error("protocol violation: " + event + " is illegal in state " + state + (detail.empty() ? "" : " (" + detail + ")")),
     state_(std::move(state)),
     event_(std::move(event)) {}
//---------------------------------------------------------------------------
std::string event_name(const Event& e) {
   return std::visit(Overloaded{
                        [](const event::ProfilingDone&) { return "ProfilingDone"; },
                        [](const event::ProfileReceived&) { return "ProfileReceived"; },
                        [](const event::WorkloadArrived&) { return "WorkloadArrived"; },
                        [](const event::DistributionComputed&) { return "DistributionComputed"; },
                        [](const event::BroadcastDone&) { return "BroadcastDone"; },
                        [](const event::LocalInferenceDone&) { return "LocalInferenceDone"; },
                        [](const event::NodeDisconnected&) { return "NodeDisconnected"; },
                        [](const event::AssignmentReceived&) { return "AssignmentReceived"; },
                        [](const event::ResultSent&) { return "ResultSent"; },
                        [](const event::ResultReceived&) { return "ResultReceived"; },
                     },
                     e);
}
//---------------------------------------------------------------------------
std::string describe(const Event& e) {
   std::ostringstream out;
   out << event_name(e);
   std::visit(Overloaded{
                 [&](const event::ProfilingDone& ev) { out << "(node=" << ev.node << " perf=" << join_perf(ev.perf) << ")"; },
                 [&](const event::ProfileReceived& ev) { out << "(node=" << ev.node << " perf=" << join_perf(ev.perf) << ")"; },
                 [&](const event::WorkloadArrived& ev) {
                    out << "(request=" << ev.request.id << " R=" << ev.request.batch_size << " P=" << ev.request.perf_req << " A=" << ev.request.acc_req << ")";
                 },
                 [&](const event::DistributionComputed& ev) {
                    out << "(request=" << ev.request_id;
                    for (const auto& s : ev.assignment.shares)
                       out << " " << s.node << ":" << s.images << "@" << s.level;
                    out << ")";
                 },
                 [&](const event::LocalInferenceDone& ev) { out << "(images=" << ev.result.images_done << ")"; },
                 [&](const event::NodeDisconnected& ev) { out << "(node=" << ev.node << ")"; },
                 [&](const event::AssignmentReceived& ev) { out << "(request=" << ev.request_id << " images=" << ev.images << " level=" << ev.level << ")"; },
                 [&](const event::ResultReceived& ev) { out << "(node=" << ev.result.node << " images=" << ev.result.images_done << ")"; },
                 [](const auto&) {},
              },
              e);
   return out.str();
}
//---------------------------------------------------------------------------
std::string describe(const GatewayAction& a) {
   std::ostringstream out;
   std::visit(Overloaded{
                 [&](const action::ComputeDistribution& x) {
                    out << "ComputeDistribution(request=" << x.request.id << " images=" << x.request.batch_size << " nodes=" << x.nodes.size()
                        << (x.redistribution ? " redistribution" : "") << ")";
                 },
                 [&](const action::Broadcast& x) { out << "Broadcast(request=" << x.request_id << " shares=" << x.assignment.shares.size() << ")"; },
                 [&](const action::RunLocalInference& x) { out << "RunLocalInference(images=" << x.images << " level=" << x.level << ")"; },
                 [&](const action::UpdateProfilingTable& x) { out << "UpdateProfilingTable(node=" << x.node << (x.perf.empty() ? " removed" : "") << ")"; },
                 [&](const action::CompleteRequest& x) { out << "CompleteRequest(request=" << x.request_id << ")"; },
                 [&](const action::Redeliver& x) { out << "Redeliver(" << event_name(x.event) << ")"; },
              },
              a);
   return out.str();
}
//---------------------------------------------------------------------------
std::string describe(const WorkerAction& a) {
   return std::visit(Overloaded{
                        [](const action::SendProfile&) { return std::string("SendProfile"); },
                        [](const action::RunInference& x) { return "RunInference(images=" + std::to_string(x.images) + " level=" + std::to_string(x.level) + ")"; },
                        [](const action::SendResult&) { return std::string("SendResult"); },
                        [](const action::Shutdown&) { return std::string("Shutdown"); },
                     },
                     a);
}
//---------------------------------------------------------------------------
std::string to_string(GatewayState s) {
   switch (s) {
      case GatewayState::Profile: return "Profile";
      case GatewayState::NetCom: return "NetCom";
      case GatewayState::Distribute: return "Distribute";
      case GatewayState::Inference: return "Inference";
   }
   return "?";
}
//---------------------------------------------------------------------------
std::string to_string(WorkerState s) {
   switch (s) {
      case WorkerState::Profile: return "Profile";
      case WorkerState::NetCom: return "NetCom";
      case WorkerState::Inference: return "Inference";
   }
   return "?";
}
//---------------------------------------------------------------------------
GatewayMachine GatewayMachine::initial(NodeId self) {
   GatewayMachine m;
   m.ctx.self = self;
   return m;
}
//---------------------------------------------------------------------------
std::vector<NodeId> GatewayMachine::members() const {
   std::vector<NodeId> out;
   for (const auto& [node, perf] : ctx.profiles)
      out.push_back(node);
   return out;
}
//---------------------------------------------------------------------------
GatewayStep gateway_step(const GatewayMachine& machine, const Event& e) {
   if (std::holds_alternative<event::AssignmentReceived>(e) || std::holds_alternative<event::ResultSent>(e))
      illegal(machine.state, e, "local-node event delivered to the gateway");
   switch (machine.state) {
      case GatewayState::Profile: return step_profile(machine, e);
      case GatewayState::NetCom: return step_netcom(machine, e);
      case GatewayState::Distribute: return step_distribute(machine, e);
      case GatewayState::Inference: return step_inference(machine, e);
   }
   illegal(machine.state, e);
}
//---------------------------------------------------------------------------
WorkerStep worker_step(const WorkerMachine& machine, const Event& e) {
   WorkerMachine m = machine;
   std::vector<WorkerAction> actions;
   if (std::holds_alternative<event::NodeDisconnected>(e)) {
      // gateway link lost: nothing left to serve
      actions.push_back(action::Shutdown{});
      return {std::move(m), std::move(actions)};
   }
   switch (m.state) {
      case WorkerState::Profile:
         if (const auto* ev = std::get_if<event::ProfilingDone>(&e)) {
            m.state = WorkerState::NetCom;
            actions.push_back(action::SendProfile{ev->node, ev->perf});
            break;
         }
         illegal(m.state, e);
      case WorkerState::NetCom:
         if (const auto* ev = std::get_if<event::AssignmentReceived>(&e)) {
            if (m.result_pending)
               illegal(m.state, e, "previous result not yet sent");
            m.state = WorkerState::Inference;
            m.current = *ev;
            actions.push_back(action::RunInference{ev->request_id, ev->images, ev->level, ev->seed});
            break;
         }
         if (std::holds_alternative<event::ResultSent>(e)) {
            if (!m.result_pending)
               illegal(m.state, e, "no result awaiting delivery");
            m.result_pending = false;
            break;
         }
         illegal(m.state, e);
      case WorkerState::Inference:
         if (const auto* ev = std::get_if<event::LocalInferenceDone>(&e)) {
            m.state = WorkerState::NetCom;
            m.result_pending = true;
            m.current.reset();
            actions.push_back(action::SendResult{ev->result});
            break;
         }
         illegal(m.state, e);
   }
   return {std::move(m), std::move(actions)};
}
//---------------------------------------------------------------------------
} // namespace edgedist::fsm
