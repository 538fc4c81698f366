#pragma once

#include "edgedist/fsm.hpp"
#include "edgedist/session.hpp"
#include "edgedist/simnode.hpp"

#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

namespace edgedist::sim {

/// Test hook: drop the link part-way through the first assignment of
/// `request`, without reporting a result.
struct FaultPlan {
   RequestId request = 0;
   double fraction = 0.5;
};

struct WorkerOptions {
   /// Simulated seconds per wall-clock second.
   double time_scale = 1.0;
   std::optional<FaultPlan> fault;
   proto::SessionOptions session{std::chrono::milliseconds(500), 3, false};
};

/// A local node: worker FSM + gateway session + executor thread.
class WorkerRuntime {
 public:
   WorkerRuntime(NodeProfile profile, ModelCatalog catalog, std::unique_ptr<proto::Transport> transport, WorkerOptions options = {});
   ~WorkerRuntime();
   WorkerRuntime(const WorkerRuntime&) = delete;
   WorkerRuntime& operator=(const WorkerRuntime&) = delete;

   /// Says Hello, profiles itself and reports. Throws InvalidArgument for a
   /// profile that does not fit the catalog.
   void start();
   /// Leaves the cluster with a Bye.
   void stop();
   /// Blocks until the gateway link is gone.
   void wait();
   bool finished() const;
   /// Empty unless the runtime stopped on a protocol violation.
   std::string error() const;
   std::int64_t images_done() const;

 private:
   struct Job {
      RequestId request = 0;
      std::int64_t images = 0;
      int level = 0;
      std::uint64_t seed = 0;
   };

   void post(fsm::Event e);
   void event_loop();
   void executor_loop();
   void perform(const fsm::WorkerAction& a);
   bool sleep_for(double wall_seconds);

   NodeProfile profile_;
   ModelCatalog catalog_;
   WorkerOptions options_;
   fsm::WorkerMachine machine_;
   std::deque<fsm::event::AssignmentReceived> backlog_;
   bool fault_fired_ = false;

   mutable std::mutex mutex_;
   std::condition_variable wake_;
   std::deque<fsm::Event> inbox_;
   std::optional<Job> job_;
   bool stopping_ = false;
   bool finished_ = false;
   std::string error_;
   std::int64_t images_done_ = 0;

   std::thread loop_thread_;
   std::thread executor_thread_;
   std::unique_ptr<proto::Session> session_;
};

} // namespace edgedist::sim
