#include "edgedist/session.hpp"

#include <array>

namespace edgedist::proto {
//---------------------------------------------------------------------------
std::string_view to_string(CloseReason reason) {
   switch (reason) {
      case CloseReason::PeerClosed: return "peer closed";
      case CloseReason::HeartbeatTimeout: return "heartbeat timeout";
      case CloseReason::DecodeError: return "decode error";
      case CloseReason::PeerBye: return "peer said bye";
      case CloseReason::LocalClose: return "closed locally";
   }
   return "?";
}
//---------------------------------------------------------------------------
Session::Session(std::unique_ptr<Transport> transport, SessionOptions options)
   : transport_(std::move(transport)), options_(options) {}
//---------------------------------------------------------------------------
Session::~Session() {
   close();
   join();
}
//---------------------------------------------------------------------------
void Session::start(MessageHandler on_message, CloseHandler on_close) {
   on_message_ = std::move(on_message);
   on_close_ = std::move(on_close);
   reader_ = std::thread([this] { run(); });
}
//---------------------------------------------------------------------------
bool Session::send(const Message& m) {
   auto frame = encode(m);
   std::lock_guard lock(send_mutex_);
   if (!open_.load())
      return false;
   return transport_->write_all(frame);
}
//---------------------------------------------------------------------------
void Session::close() {
   if (closing_.exchange(true))
      return;
   send(msg::Bye{});
   open_ = false;
   transport_->close();
}
//---------------------------------------------------------------------------
void Session::abort() {
   if (closing_.exchange(true))
      return;
   {
      std::lock_guard lock(send_mutex_);
      open_ = false;
   }
   transport_->close();
}
//---------------------------------------------------------------------------
void Session::join() {
   if (reader_.joinable() && reader_.get_id() != std::this_thread::get_id())
      reader_.join();
}
//---------------------------------------------------------------------------
void Session::run() {
   using clock = std::chrono::steady_clock;
   FrameDecoder decoder;
   std::array<std::uint8_t, 16384> buffer{};
   CloseReason reason = CloseReason::PeerClosed;
   std::string detail;
   auto next_ping = clock::now() + options_.ping_interval;

   auto finish = [&](CloseReason r, std::string d) {
      reason = closing_.load() ? CloseReason::LocalClose : r;
      detail = std::move(d);
   };

   while (true) {
      auto timeout = std::chrono::milliseconds(200);
      if (options_.send_pings)
         timeout = std::max(std::chrono::milliseconds(0), std::chrono::duration_cast<std::chrono::milliseconds>(next_ping - clock::now()));
      ReadResult r = transport_->read_some(buffer, timeout);
      if (r.status == ReadStatus::Closed) {
         finish(CloseReason::PeerClosed, transport_->peer());
         break;
      }
      if (r.status == ReadStatus::Data) {
         decoder.feed(std::span<const std::uint8_t>(buffer.data(), r.bytes));
         bool stop = false;
         try {
            while (auto m = decoder.next()) {
               if (std::holds_alternative<msg::Ping>(*m)) {
                  send(msg::Pong{});
               } else if (std::holds_alternative<msg::Pong>(*m)) {
                  missed_ = 0;
                  awaiting_pong_ = false;
               } else if (std::holds_alternative<msg::Bye>(*m)) {
                  finish(CloseReason::PeerBye, transport_->peer());
                  stop = true;
                  break;
               } else if (on_message_) {
                  on_message_(*m);
               }
            }
         } catch (const DecodeError& e) {
            send(msg::Bye{});
            finish(CloseReason::DecodeError, e.what());
            stop = true;
         }
         if (stop)
            break;
      }
      if (options_.send_pings && clock::now() >= next_ping) {
         if (awaiting_pong_.load() && ++missed_ >= options_.max_missed_pings) {
            finish(CloseReason::HeartbeatTimeout, std::to_string(missed_.load()) + " pings unanswered");
            break;
         }
         awaiting_pong_ = true;
         send(msg::Ping{});
         next_ping += options_.ping_interval;
         if (next_ping < clock::now())
            next_ping = clock::now() + options_.ping_interval;
      }
   }
   {
      std::lock_guard lock(send_mutex_);
      open_ = false;
   }
   transport_->close();
   if (on_close_)
      on_close_(reason, detail);
}
//---------------------------------------------------------------------------
} // namespace edgedist::proto
