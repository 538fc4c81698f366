#pragma once

#include "edgedist/fsm.hpp"
#include "edgedist/policy.hpp"
#include "edgedist/session.hpp"
#include "edgedist/simnode.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace edgedist::harness {

/// Failure before any request was serviced (bad scenario, spawn, bind).
class SetupError : public std::runtime_error {
 public:
   using std::runtime_error::runtime_error;
};

/// Failure while servicing requests.
class RuntimeError : public std::runtime_error {
 public:
   using std::runtime_error::runtime_error;
};

enum class AccuracyCheck { Delivered, Empirical };

using ImageRange = std::pair<std::int64_t, std::int64_t>;  // [first, last)

/// One Assign (or the gateway's own share) within a request. Times are
/// simulated seconds since the request's first broadcast.
struct AssignmentRecord {
   NodeId node = 0;
   std::int64_t images = 0;
   int level = 0;
   std::uint64_t seed = 0;
   double issued_at = 0.0;
   std::vector<ImageRange> ranges;
   bool reported = false;
   bool orphaned = false;
   double started_at = 0.0;
   double finished_at = 0.0;
   std::int64_t correct = 0;
};

struct RequestAudit {
   RequestId request_id = 0;
   std::int64_t batch_size = 0;
   std::int64_t images_reported = 0;  // sum of images_done over all results
   std::int64_t duplicates = 0;       // image indices reported more than once
   std::int64_t missing = 0;          // image indices never reported
   std::size_t redistributions = 0;
   std::vector<AssignmentRecord> assignments;
};

struct CompletedRequest {
   InferenceRequest request;
   RequestOutcome outcome;
   RequestAudit audit;
};

/// Simulated time (seconds since the request began) at which `node` dropped
/// while working on `open`. Returning nullopt falls back to scaled wall time.
using DisconnectClock = std::function<std::optional<double>(NodeId node, RequestId request, const AssignmentRecord& open)>;

struct GatewayConfig {
   sim::NodeProfile self;
   ModelCatalog catalog = default_catalog();
   policy::Strategy strategy = policy::Strategy::Proportional;
   std::uint64_t seed = 0;
   double time_scale = 1.0;
   AccuracyCheck accuracy_check = AccuracyCheck::Delivered;
   proto::SessionOptions session{};
   DisconnectClock disconnect_clock;
   /// Receives one line per FSM transition, from the event-loop thread.
   std::function<void(const std::string&)> trace;
};

/// Gateway node: FSM event loop, one session per local node, the dispatch
/// policy and its own simulated executor.
class GatewayRuntime {
 public:
   explicit GatewayRuntime(GatewayConfig config);
   ~GatewayRuntime();
   GatewayRuntime(const GatewayRuntime&) = delete;
   GatewayRuntime& operator=(const GatewayRuntime&) = delete;

   void start();
   void add_connection(std::unique_ptr<proto::Transport> transport);
   void submit(const InferenceRequest& request);

   /// Members include the gateway itself.
   std::vector<NodeId> members() const;
   bool wait_for_members(std::vector<NodeId> expected, std::chrono::milliseconds timeout);
   /// Blocks until `count` requests have completed since start. Throws
   /// RuntimeError on a failure or timeout.
   std::vector<CompletedRequest> wait_completed(std::size_t count, std::chrono::milliseconds timeout);
   void stop();

 private:
   struct Connection {
      std::unique_ptr<proto::Session> session;
      std::optional<NodeId> node;
   };
   struct LocalJob {
      RequestId request = 0;
      std::int64_t images = 0;
      int level = 0;
      std::uint64_t seed = 0;
   };
   struct Ledger {
      InferenceRequest request;
      std::chrono::steady_clock::time_point began;
      std::vector<AssignmentRecord> records;
      std::map<NodeId, int> sequence;
      std::vector<ImageRange> orphans;
      std::optional<double> reissue_at;
      std::size_t redistributions = 0;
      std::int64_t next_image = 0;
      std::int64_t images_reported = 0;
   };

   void post(fsm::Event e);
   void fail(const std::string& why);
   void event_loop();
   void step(const fsm::Event& e, std::deque<fsm::Event>& internal);
   void perform(const fsm::GatewayAction& a, const fsm::Event& cause, std::deque<fsm::Event>& internal);
   void on_message(std::size_t conn, const proto::Message& m);
   void on_closed(std::size_t conn);
   void note_disconnect(NodeId node);
   void record_result(const TaskResult& r);
   void complete(RequestId id);
   void executor_loop();
   void send_to(NodeId node, const proto::Message& m);

   GatewayConfig config_;
   fsm::GatewayMachine machine_;
   std::map<RequestId, Ledger> ledgers_;
   std::map<NodeId, double> drop_times_;

   mutable std::mutex mutex_;
   std::condition_variable wake_;
   std::deque<fsm::Event> inbox_;
   std::vector<NodeId> members_;
   std::vector<CompletedRequest> completed_;
   std::optional<std::string> failure_;
   bool stopping_ = false;
   std::optional<LocalJob> local_job_;
   std::map<std::size_t, Connection> connections_;
   std::size_t next_connection_ = 0;

   std::thread loop_thread_;
   std::thread executor_thread_;
};

} // namespace edgedist::harness
