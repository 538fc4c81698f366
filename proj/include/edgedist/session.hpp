#pragma once

#include "edgedist/proto.hpp"
#include "edgedist/transport.hpp"

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace edgedist::proto {

struct SessionOptions {
   std::chrono::milliseconds ping_interval{500};
   int max_missed_pings = 3;
   /// Only the gateway side probes; both sides answer Pings.
   bool send_pings = true;
};

enum class CloseReason { PeerClosed, HeartbeatTimeout, DecodeError, PeerBye, LocalClose };
std::string_view to_string(CloseReason reason);

/// Owns one transport. A reader thread decodes frames, answers Pings,
/// tracks Pongs and hands every other message to the message handler. The
/// close handler runs exactly once, on the reader thread, after the last
/// message.
class Session {
 public:
   using MessageHandler = std::function<void(const Message&)>;
   using CloseHandler = std::function<void(CloseReason, const std::string& detail)>;

   explicit Session(std::unique_ptr<Transport> transport, SessionOptions options = {});
   ~Session();
   Session(const Session&) = delete;
   Session& operator=(const Session&) = delete;

   void start(MessageHandler on_message, CloseHandler on_close);
   /// Thread-safe. False if the stream is gone.
   bool send(const Message& m);
   /// Sends Bye (best effort) and closes. Does not wait for the reader.
   void close();
   /// Drops the stream without a Bye, as a crashing peer would.
   void abort();
   /// Blocks until the reader thread has finished. Not callable from handlers.
   void join();

   bool is_open() const { return open_.load(); }
   int missed_pings() const { return missed_.load(); }
   std::string peer() const { return transport_->peer(); }

 private:
   void run();

   std::unique_ptr<Transport> transport_;
   SessionOptions options_;
   MessageHandler on_message_;
   CloseHandler on_close_;
   std::mutex send_mutex_;
   std::atomic<bool> open_{true};
   std::atomic<bool> closing_{false};
   std::atomic<int> missed_{0};
   std::atomic<bool> awaiting_pong_{false};
   std::thread reader_;
};

} // namespace edgedist::proto
