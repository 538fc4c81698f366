#include "edgedist/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace edgedist::harness {
namespace {
//---------------------------------------------------------------------------
std::vector<ImageRange> take_images(std::vector<ImageRange>& pool, std::int64_t count) {
   std::vector<ImageRange> out;
   while (count > 0 && !pool.empty()) {
      auto& front = pool.front();
      std::int64_t n = std::min(count, front.second - front.first);
      out.emplace_back(front.first, front.first + n);
      front.first += n;
      count -= n;
      if (front.first == front.second)
         pool.erase(pool.begin());
   }
   if (count > 0)
      throw RuntimeError("image ledger ran out of images to assign");
   return out;
}
//---------------------------------------------------------------------------
bool valid_profile(const std::vector<double>& perf, std::size_t levels) {
   if (perf.size() != levels)
      return false;
   for (std::size_t i = 0; i < perf.size(); ++i)
      if (!(perf[i] > 0.0) || !std::isfinite(perf[i]) || (i > 0 && perf[i] < perf[i - 1]))
         return false;
   return true;
}
//---------------------------------------------------------------------------
} // namespace
//---------------------------------------------------------------------------
GatewayRuntime::GatewayRuntime(GatewayConfig config) : config_(std::move(config)), machine_(fsm::GatewayMachine::initial(config_.self.node_id)) {
   if (!(config_.time_scale > 0.0))
      throw SetupError("time scale must be positive");
}
//---------------------------------------------------------------------------
GatewayRuntime::~GatewayRuntime() {
   stop();
}
//---------------------------------------------------------------------------
void GatewayRuntime::start() {
   try {
      auto report = sim::profile_self(config_.self, config_.catalog);
      post(fsm::event::ProfilingDone{config_.self.node_id, report.perf_column});
   } catch (const InvalidArgument& e) {
      throw SetupError(std::string("gateway profile: ") + e.what());
   }
   loop_thread_ = std::thread([this] { event_loop(); });
   executor_thread_ = std::thread([this] { executor_loop(); });
}
//---------------------------------------------------------------------------
void GatewayRuntime::stop() {
   std::map<std::size_t, Connection> connections;
   {
      std::lock_guard lock(mutex_);
      stopping_ = true;
      connections.swap(connections_);
   }
   wake_.notify_all();
   for (auto& [id, c] : connections)
      c.session->close();
   for (auto& [id, c] : connections)
      c.session->join();
   if (loop_thread_.joinable())
      loop_thread_.join();
   if (executor_thread_.joinable())
      executor_thread_.join();
}
//---------------------------------------------------------------------------
void GatewayRuntime::add_connection(std::unique_ptr<proto::Transport> transport) {
   auto session = std::make_unique<proto::Session>(std::move(transport), config_.session);
   auto* raw = session.get();
   std::size_t id;
   {
      std::lock_guard lock(mutex_);
      id = next_connection_++;
      connections_[id] = Connection{std::move(session), std::nullopt};
   }
   raw->start([this, id](const proto::Message& m) { on_message(id, m); }, [this, id](proto::CloseReason, const std::string&) { on_closed(id); });
}
//---------------------------------------------------------------------------
void GatewayRuntime::submit(const InferenceRequest& request) {
   request.validate(config_.catalog);
   post(fsm::event::WorkloadArrived{request});
}
//---------------------------------------------------------------------------
std::vector<NodeId> GatewayRuntime::members() const {
   std::lock_guard lock(mutex_);
   return members_;
}
//---------------------------------------------------------------------------
bool GatewayRuntime::wait_for_members(std::vector<NodeId> expected, std::chrono::milliseconds timeout) {
   std::sort(expected.begin(), expected.end());
   std::unique_lock lock(mutex_);
   return wake_.wait_for(lock, timeout, [&] { return members_ == expected || failure_.has_value(); }) && !failure_;
}
//---------------------------------------------------------------------------
std::vector<CompletedRequest> GatewayRuntime::wait_completed(std::size_t count, std::chrono::milliseconds timeout) {
   std::unique_lock lock(mutex_);
   bool done = wake_.wait_for(lock, timeout, [&] { return completed_.size() >= count || failure_.has_value(); });
   if (failure_)
      throw RuntimeError(*failure_);
   if (!done)
      throw RuntimeError("timed out waiting for request " + std::to_string(completed_.size() + 1) + " to complete");
   return {completed_.begin(), completed_.begin() + static_cast<std::ptrdiff_t>(count)};
}
//---------------------------------------------------------------------------
void GatewayRuntime::post(fsm::Event e) {
   {
      std::lock_guard lock(mutex_);
      inbox_.push_back(std::move(e));
   }
   wake_.notify_all();
}
//---------------------------------------------------------------------------
void GatewayRuntime::fail(const std::string& why) {
   {
      std::lock_guard lock(mutex_);
      if (!failure_)
         failure_ = why;
   }
   wake_.notify_all();
}
//---------------------------------------------------------------------------
void GatewayRuntime::on_message(std::size_t conn, const proto::Message& m) {
   std::unique_lock lock(mutex_);
   auto it = connections_.find(conn);
   if (it == connections_.end())
      return;
   auto& c = it->second;
   auto reject = [&](const std::string&) {
      auto* s = c.session.get();
      lock.unlock();
      s->close();
   };
   if (const auto* hello = std::get_if<proto::msg::Hello>(&m)) {
      bool taken = hello->node_id == config_.self.node_id ||
                   std::any_of(connections_.begin(), connections_.end(), [&](const auto& kv) { return kv.first != conn && kv.second.node == hello->node_id; });
      if (c.node || taken)
         return reject("duplicate node id");
      c.node = hello->node_id;
      return;
   }
   if (!c.node)
      return reject("message before Hello");
   NodeId node = *c.node;
   if (const auto* report = std::get_if<proto::msg::ProfileReport>(&m)) {
      if (report->node_id != node || !valid_profile(report->perf_column, config_.catalog.size()))
         return reject("bad profile report");
      lock.unlock();
      post(fsm::event::ProfileReceived{node, report->perf_column});
      return;
   }
   if (const auto* r = std::get_if<proto::msg::Result>(&m)) {
      if (r->node_id != node)
         return reject("result for another node");
      lock.unlock();
      post(fsm::event::ResultReceived{TaskResult{r->request_id, node, r->images_done, r->top5_correct, r->elapsed_ms}});
      return;
   }
   reject("unexpected message");
}
//---------------------------------------------------------------------------
void GatewayRuntime::on_closed(std::size_t conn) {
   std::optional<NodeId> node;
   {
      std::lock_guard lock(mutex_);
      auto it = connections_.find(conn);
      if (it == connections_.end() || stopping_)
         return;
      node = it->second.node;
      it->second.node.reset();
   }
   if (node)
      post(fsm::event::NodeDisconnected{*node});
}
//---------------------------------------------------------------------------
void GatewayRuntime::send_to(NodeId node, const proto::Message& m) {
   std::lock_guard lock(mutex_);
   for (auto& [id, c] : connections_)
      if (c.node == node) {
         c.session->send(m);
         return;
      }
   // A node that vanished after the distribution was computed is picked up by
   // its NodeDisconnected event.
}
//---------------------------------------------------------------------------
void GatewayRuntime::event_loop() {
   std::deque<fsm::Event> internal;
   while (true) {
      fsm::Event e;
      if (!internal.empty()) {
         e = std::move(internal.front());
         internal.pop_front();
      } else {
         std::unique_lock lock(mutex_);
         wake_.wait(lock, [&] { return !inbox_.empty() || stopping_; });
         if (stopping_ || failure_)
            return;
         e = std::move(inbox_.front());
         inbox_.pop_front();
         if (const auto* d = std::get_if<fsm::event::NodeDisconnected>(&e)) {
            lock.unlock();
            note_disconnect(d->node);
         }
      }
      try {
         step(e, internal);
      } catch (const std::exception& ex) {
         fail(ex.what());
         return;
      }
   }
}
//---------------------------------------------------------------------------
void GatewayRuntime::note_disconnect(NodeId node) {
   if (!machine_.ctx.active)
      return;
   auto& ledger = ledgers_.at(machine_.ctx.active->request.id);
   for (const auto& rec : ledger.records) {
      if (rec.node != node || rec.reported || rec.orphaned)
         continue;
      std::optional<double> t;
      if (config_.disconnect_clock)
         t = config_.disconnect_clock(node, ledger.request.id, rec);
      if (!t)
         t = std::chrono::duration<double>(std::chrono::steady_clock::now() - ledger.began).count() * config_.time_scale;
      drop_times_[node] = *t;
      return;
   }
}
//---------------------------------------------------------------------------
void GatewayRuntime::step(const fsm::Event& e, std::deque<fsm::Event>& internal) {
   auto before = machine_.state;
   auto s = fsm::gateway_step(machine_, e);
   if (const auto* r = std::get_if<fsm::event::ResultReceived>(&e))
      record_result(r->result);
   else if (const auto* l = std::get_if<fsm::event::LocalInferenceDone>(&e); l && l->result.images_done > 0)
      record_result(l->result);
   machine_ = std::move(s.next);
   {
      std::lock_guard lock(mutex_);
      members_ = machine_.members();
   }
   wake_.notify_all();
   if (config_.trace) {
      std::ostringstream line;
      line << fsm::to_string(before) << " --" << fsm::describe(e) << "--> " << fsm::to_string(machine_.state);
      for (const auto& a : s.actions)
         line << " | " << fsm::describe(a);
      config_.trace(line.str());
   }
   for (const auto& a : s.actions)
      perform(a, e, internal);
}
//---------------------------------------------------------------------------
void GatewayRuntime::perform(const fsm::GatewayAction& a, const fsm::Event& cause, std::deque<fsm::Event>& internal) {
   if (const auto* c = std::get_if<fsm::action::ComputeDistribution>(&a)) {
      if (!c->redistribution) {
         Ledger ledger;
         ledger.request = c->request;
         ledger.began = std::chrono::steady_clock::now();
         ledgers_[c->request.id] = std::move(ledger);
      } else {
         auto& ledger = ledgers_.at(c->request.id);
         const auto& d = std::get<fsm::event::NodeDisconnected>(cause);
         std::int64_t orphaned = 0;
         for (auto& rec : ledger.records)
            if (rec.node == d.node && !rec.reported && !rec.orphaned) {
               rec.orphaned = true;
               orphaned += rec.images;
               ledger.orphans.insert(ledger.orphans.end(), rec.ranges.begin(), rec.ranges.end());
            }
         if (orphaned != c->request.batch_size)
            throw RuntimeError("ledger holds " + std::to_string(orphaned) + " orphaned images, state machine " + std::to_string(c->request.batch_size));
         auto t = drop_times_.find(d.node);
         ledger.reissue_at = t == drop_times_.end() ? 0.0 : t->second;
         drop_times_.erase(d.node);
         ++ledger.redistributions;
      }
      std::vector<std::vector<double>> perf(config_.catalog.size());
      for (NodeId node : c->nodes) {
         const auto& column = machine_.ctx.profiles.at(node);
         for (std::size_t level = 0; level < perf.size(); ++level)
            perf[level].push_back(column.at(level));
      }
      ProfilingTable table(config_.catalog, c->nodes, perf);
      auto out = policy::dispatch(config_.strategy, policy::PolicyInput{table, c->request});
      internal.push_back(fsm::event::DistributionComputed{c->request.id, out.assignment});
   } else if (const auto* b = std::get_if<fsm::action::Broadcast>(&a)) {
      auto& ledger = ledgers_.at(b->request_id);
      bool reissue = ledger.reissue_at.has_value();
      for (const auto& share : b->assignment.shares) {
         if (share.images == 0)
            continue;
         AssignmentRecord rec;
         rec.node = share.node;
         rec.images = share.images;
         rec.level = share.level;
         rec.seed = sim::derive_seed({config_.seed, b->request_id, share.node, static_cast<std::uint64_t>(ledger.sequence[share.node]++)});
         rec.issued_at = reissue ? *ledger.reissue_at : 0.0;
         if (reissue) {
            rec.ranges = take_images(ledger.orphans, share.images);
         } else {
            rec.ranges = {{ledger.next_image, ledger.next_image + share.images}};
            ledger.next_image += share.images;
         }
         if (share.node != config_.self.node_id)
            send_to(share.node, proto::msg::Assign{b->request_id, rec.images, rec.level, rec.seed});
         ledger.records.push_back(std::move(rec));
      }
      ledger.reissue_at.reset();
      internal.push_back(fsm::event::BroadcastDone{});
   } else if (const auto* l = std::get_if<fsm::action::RunLocalInference>(&a)) {
      if (l->images == 0) {
         internal.push_back(fsm::event::LocalInferenceDone{TaskResult{l->request_id, config_.self.node_id, 0, 0, 0}});
      } else {
         std::uint64_t seed = 0;
         for (const auto& rec : ledgers_.at(l->request_id).records)
            if (rec.node == config_.self.node_id && !rec.reported && !rec.orphaned)
               seed = rec.seed;
         {
            std::lock_guard lock(mutex_);
            local_job_ = LocalJob{l->request_id, l->images, l->level, seed};
         }
         wake_.notify_all();
      }
   } else if (const auto* done = std::get_if<fsm::action::CompleteRequest>(&a)) {
      complete(done->request_id);
   } else if (const auto* r = std::get_if<fsm::action::Redeliver>(&a)) {
      internal.push_back(r->event);
   }
}
//---------------------------------------------------------------------------
void GatewayRuntime::record_result(const TaskResult& r) {
   auto it = ledgers_.find(r.request_id);
   if (it == ledgers_.end())
      throw RuntimeError("result for unknown request " + std::to_string(r.request_id));
   auto& ledger = it->second;
   double previous = 0.0;
   for (auto& rec : ledger.records) {
      if (rec.node != r.node || rec.orphaned)
         continue;
      if (rec.reported) {
         previous = std::max(previous, rec.finished_at);
         continue;
      }
      if (rec.images != r.images_done)
         throw RuntimeError("node " + std::to_string(r.node) + " reported " + std::to_string(r.images_done) + " images for an assignment of " +
                            std::to_string(rec.images));
      rec.reported = true;
      rec.started_at = std::max(rec.issued_at, previous);
      rec.finished_at = rec.started_at + static_cast<double>(r.elapsed_ms) / 1000.0;
      rec.correct = r.top5_correct;
      ledger.images_reported += r.images_done;
      return;
   }
   throw RuntimeError("node " + std::to_string(r.node) + " reported a result it was never assigned");
}
//---------------------------------------------------------------------------
void GatewayRuntime::complete(RequestId id) {
   auto node = ledgers_.extract(id);
   auto& ledger = node.mapped();
   const auto& request = ledger.request;

   CompletedRequest done;
   done.request = request;
   auto& out = done.outcome;
   out.request_id = id;
   out.batch_size = request.batch_size;
   std::map<NodeId, NodeOutcome> per_node;
   double weighted = 0.0;
   std::vector<int> coverage(static_cast<std::size_t>(request.batch_size), 0);
   for (const auto& rec : ledger.records) {
      if (!rec.reported)
         continue;
      auto& n = per_node[rec.node];
      n.node = rec.node;
      n.elapsed = std::max(n.elapsed, rec.finished_at);
      n.images += rec.images;
      n.correct += rec.correct;
      weighted += static_cast<double>(rec.images) * config_.catalog.accuracy(rec.level);
      for (auto [first, last] : rec.ranges)
         for (auto i = first; i < last; ++i)
            ++coverage.at(static_cast<std::size_t>(i));
   }
   for (auto& [n, o] : per_node)
      out.per_node.push_back(o);
   finalize_outcome(out);
   out.delivered_accuracy = weighted / static_cast<double>(request.batch_size);
   out.perf_violation = !meets(out.achieved_throughput, request.perf_req);
   double acc = config_.accuracy_check == AccuracyCheck::Delivered ? out.delivered_accuracy : out.empirical_top5;
   out.acc_violation = !meets(acc, request.acc_req);

   auto& audit = done.audit;
   audit.request_id = id;
   audit.batch_size = request.batch_size;
   audit.images_reported = ledger.images_reported;
   audit.duplicates = std::count_if(coverage.begin(), coverage.end(), [](int c) { return c > 1; });
   audit.missing = std::count(coverage.begin(), coverage.end(), 0);
   audit.redistributions = ledger.redistributions;
   audit.assignments = std::move(ledger.records);
   {
      std::lock_guard lock(mutex_);
      completed_.push_back(std::move(done));
   }
   wake_.notify_all();
}
//---------------------------------------------------------------------------
void GatewayRuntime::executor_loop() {
   while (true) {
      LocalJob job;
      {
         std::unique_lock lock(mutex_);
         wake_.wait(lock, [&] { return stopping_ || local_job_.has_value(); });
         if (stopping_)
            return;
         job = *local_job_;
         local_job_.reset();
      }
      TaskResult r = sim::run_inference(config_.self, config_.catalog, job.request, job.images, job.level, job.seed);
      std::unique_lock lock(mutex_);
      auto until = std::chrono::steady_clock::now() +
                   std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(static_cast<double>(r.elapsed_ms) / 1000.0 / config_.time_scale));
      if (wake_.wait_until(lock, until, [&] { return stopping_; }))
         return;
      inbox_.push_back(fsm::event::LocalInferenceDone{r});
      lock.unlock();
      wake_.notify_all();
   }
}
//---------------------------------------------------------------------------
} // namespace edgedist::harness
