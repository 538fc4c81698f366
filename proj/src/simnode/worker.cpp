#include "edgedist/worker.hpp"

namespace edgedist::sim {
//---------------------------------------------------------------------------
WorkerRuntime::WorkerRuntime(NodeProfile profile, ModelCatalog catalog, std::unique_ptr<proto::Transport> transport, WorkerOptions options)
   : profile_(std::move(profile)),
     catalog_(std::move(catalog)),
     options_(options),
     session_(std::make_unique<proto::Session>(std::move(transport), options.session)) {
   if (!(options_.time_scale > 0.0))
      throw InvalidArgument("time scale must be positive");
}
//---------------------------------------------------------------------------
WorkerRuntime::~WorkerRuntime() {
   stop();
   {
      std::lock_guard lock(mutex_);
      stopping_ = true;
   }
   wake_.notify_all();
   if (loop_thread_.joinable())
      loop_thread_.join();
   if (executor_thread_.joinable())
      executor_thread_.join();
}
//---------------------------------------------------------------------------
void WorkerRuntime::start() {
   profile_.validate(catalog_);
   session_->start(
      [this](const proto::Message& m) {
         if (const auto* a = std::get_if<proto::msg::Assign>(&m)) {
            post(fsm::event::AssignmentReceived{a->request_id, a->images, a->level, a->seed});
            return;
         }
         {
            std::lock_guard lock(mutex_);
            error_ = "unexpected " + std::string(proto::type_name(m)) + " from the gateway";
         }
         session_->abort();
      },
      [this](proto::CloseReason, const std::string&) { post(fsm::event::NodeDisconnected{0}); });
   session_->send(proto::msg::Hello{profile_.node_id, proto::kProtocolVersion});
   auto report = profile_self(profile_, catalog_);
   post(fsm::event::ProfilingDone{profile_.node_id, report.perf_column});
   loop_thread_ = std::thread([this] { event_loop(); });
   executor_thread_ = std::thread([this] { executor_loop(); });
}
//---------------------------------------------------------------------------
void WorkerRuntime::stop() {
   session_->close();
}
//---------------------------------------------------------------------------
void WorkerRuntime::wait() {
   std::unique_lock lock(mutex_);
   wake_.wait(lock, [&] { return finished_; });
}
//---------------------------------------------------------------------------
bool WorkerRuntime::finished() const {
   std::lock_guard lock(mutex_);
   return finished_;
}
//---------------------------------------------------------------------------
std::string WorkerRuntime::error() const {
   std::lock_guard lock(mutex_);
   return error_;
}
//---------------------------------------------------------------------------
std::int64_t WorkerRuntime::images_done() const {
   std::lock_guard lock(mutex_);
   return images_done_;
}
//---------------------------------------------------------------------------
void WorkerRuntime::post(fsm::Event e) {
   {
      std::lock_guard lock(mutex_);
      inbox_.push_back(std::move(e));
   }
   wake_.notify_all();
}
//---------------------------------------------------------------------------
void WorkerRuntime::event_loop() {
   std::deque<fsm::Event> internal;
   while (true) {
      fsm::Event e;
      if (!internal.empty()) {
         e = std::move(internal.front());
         internal.pop_front();
      } else {
         std::unique_lock lock(mutex_);
         wake_.wait(lock, [&] { return !inbox_.empty(); });
         e = std::move(inbox_.front());
         inbox_.pop_front();
      }
      // The machine serves one assignment at a time; later ones wait here.
      if (const auto* a = std::get_if<fsm::event::AssignmentReceived>(&e)) {
         if (machine_.state != fsm::WorkerState::NetCom || machine_.result_pending) {
            backlog_.push_back(*a);
            continue;
         }
         if (!catalog_.contains(a->level) || a->images < 0) {
            {
               std::lock_guard lock(mutex_);
               error_ = "invalid assignment: " + fsm::describe(e);
            }
            session_->abort();
            continue;
         }
      }
      fsm::WorkerStep step;
      try {
         step = fsm::worker_step(machine_, e);
      } catch (const fsm::ProtocolViolation& v) {
         {
            std::lock_guard lock(mutex_);
            error_ = v.what();
         }
         session_->abort();
         continue;
      }
      machine_ = std::move(step.next);
      bool shutdown = false;
      for (const auto& a : step.actions) {
         if (std::holds_alternative<fsm::action::Shutdown>(a)) {
            shutdown = true;
            continue;
         }
         perform(a);
         if (std::holds_alternative<fsm::action::SendResult>(a))
            internal.push_back(fsm::event::ResultSent{});
      }
      if (shutdown) {
         {
            std::lock_guard lock(mutex_);
            stopping_ = true;
            finished_ = true;
         }
         wake_.notify_all();
         return;
      }
      if (machine_.state == fsm::WorkerState::NetCom && !machine_.result_pending && !backlog_.empty() && internal.empty()) {
         internal.push_back(backlog_.front());
         backlog_.pop_front();
      }
   }
}
//---------------------------------------------------------------------------
void WorkerRuntime::perform(const fsm::WorkerAction& a) {
   if (const auto* p = std::get_if<fsm::action::SendProfile>(&a)) {
      proto::msg::ProfileReport report{p->node, p->perf, {}};
      for (std::size_t level = 0; level < p->perf.size(); ++level)
         report.acc.push_back(catalog_.accuracy(static_cast<int>(level)));
      session_->send(report);
   } else if (const auto* r = std::get_if<fsm::action::RunInference>(&a)) {
      {
         std::lock_guard lock(mutex_);
         job_ = Job{r->request_id, r->images, r->level, r->seed};
      }
      wake_.notify_all();
   } else if (const auto* s = std::get_if<fsm::action::SendResult>(&a)) {
      const auto& t = s->result;
      {
         std::lock_guard lock(mutex_);
         images_done_ += t.images_done;
      }
      session_->send(proto::msg::Result{t.request_id, t.node, t.images_done, t.top5_correct, t.elapsed_ms});
   }
}
//---------------------------------------------------------------------------
bool WorkerRuntime::sleep_for(double wall_seconds) {
   std::unique_lock lock(mutex_);
   auto until = std::chrono::steady_clock::now() + std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(wall_seconds));
   return !wake_.wait_until(lock, until, [&] { return stopping_; });
}
//---------------------------------------------------------------------------
void WorkerRuntime::executor_loop() {
   while (true) {
      Job job;
      {
         std::unique_lock lock(mutex_);
         wake_.wait(lock, [&] { return stopping_ || job_.has_value(); });
         if (stopping_)
            return;
         job = *job_;
         job_.reset();
      }
      TaskResult result = run_inference(profile_, catalog_, job.request, job.images, job.level, job.seed);
      double wall = static_cast<double>(result.elapsed_ms) / 1000.0 / options_.time_scale;
      if (options_.fault && !fault_fired_ && options_.fault->request == job.request) {
         fault_fired_ = true;
         if (sleep_for(wall * options_.fault->fraction))
            session_->abort();
         continue;
      }
      if (!sleep_for(wall))
         return;
      post(fsm::event::LocalInferenceDone{result});
   }
}
//---------------------------------------------------------------------------
} // namespace edgedist::sim
