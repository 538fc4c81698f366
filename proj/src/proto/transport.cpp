#include "edgedist/transport.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <thread>
#include <unistd.h>

namespace edgedist::proto {
namespace {
//---------------------------------------------------------------------------
struct Channel {
   std::mutex mutex;
   std::condition_variable ready;
   std::deque<std::uint8_t> bytes;
   bool closed = false;
};
//---------------------------------------------------------------------------
class PipeTransport final : public Transport {
 public:
   PipeTransport(std::shared_ptr<Channel> in, std::shared_ptr<Channel> out, std::string name)
      : in_(std::move(in)), out_(std::move(out)), name_(std::move(name)) {}
   ~PipeTransport() override { close(); }

   ReadResult read_some(std::span<std::uint8_t> buffer, std::chrono::milliseconds timeout) override {
      std::unique_lock lock(in_->mutex);
      if (!in_->ready.wait_for(lock, timeout, [&] { return !in_->bytes.empty() || in_->closed; }))
         return {ReadStatus::Timeout, 0};
      if (in_->bytes.empty())
         return {ReadStatus::Closed, 0};
      std::size_t n = std::min(buffer.size(), in_->bytes.size());
      std::copy_n(in_->bytes.begin(), n, buffer.begin());
      in_->bytes.erase(in_->bytes.begin(), in_->bytes.begin() + static_cast<std::ptrdiff_t>(n));
      return {ReadStatus::Data, n};
   }

   bool write_all(std::span<const std::uint8_t> bytes) override {
      std::lock_guard lock(out_->mutex);
      if (out_->closed)
         return false;
      out_->bytes.insert(out_->bytes.end(), bytes.begin(), bytes.end());
      out_->ready.notify_all();
      return true;
   }

   void close() override {
      for (auto* ch : {in_.get(), out_.get()}) {
         std::lock_guard lock(ch->mutex);
         ch->closed = true;
         ch->ready.notify_all();
      }
      // Our own inbound data is of no further use.
      std::lock_guard lock(in_->mutex);
      in_->bytes.clear();
   }

   std::string peer() const override { return name_; }

 private:
   std::shared_ptr<Channel> in_;
   std::shared_ptr<Channel> out_;
   std::string name_;
};
//---------------------------------------------------------------------------
class TcpTransport final : public Transport {
 public:
   TcpTransport(int fd, std::string peer) : fd_(fd), peer_(std::move(peer)) {
      int one = 1;
      ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
   }
   ~TcpTransport() override {
      close();
      ::close(fd_);
   }

   ReadResult read_some(std::span<std::uint8_t> buffer, std::chrono::milliseconds timeout) override {
      pollfd p{fd_, POLLIN, 0};
      int rc = ::poll(&p, 1, static_cast<int>(std::max<std::int64_t>(0, timeout.count())));
      if (rc == 0)
         return {ReadStatus::Timeout, 0};
      if (rc < 0)
         return errno == EINTR ? ReadResult{ReadStatus::Timeout, 0} : ReadResult{ReadStatus::Closed, 0};
      ssize_t n = ::recv(fd_, buffer.data(), buffer.size(), 0);
      if (n > 0)
         return {ReadStatus::Data, static_cast<std::size_t>(n)};
      if (n < 0 && (errno == EINTR || errno == EAGAIN))
         return {ReadStatus::Timeout, 0};
      return {ReadStatus::Closed, 0};
   }

   bool write_all(std::span<const std::uint8_t> bytes) override {
      std::lock_guard lock(write_mutex_);
      std::size_t sent = 0;
      while (sent < bytes.size()) {
         ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
         if (n < 0) {
            if (errno == EINTR)
               continue;
            return false;
         }
         sent += static_cast<std::size_t>(n);
      }
      return true;
   }

   void close() override {
      std::lock_guard lock(close_mutex_);
      if (!closed_) {
         closed_ = true;
         ::shutdown(fd_, SHUT_RDWR);
      }
   }

   std::string peer() const override { return peer_; }

 private:
   int fd_;
   std::string peer_;
   std::mutex write_mutex_;
   std::mutex close_mutex_;
   bool closed_ = false;
};
//---------------------------------------------------------------------------
sockaddr_in resolve(const std::string& host, std::uint16_t port) {
   sockaddr_in addr{};
   addr.sin_family = AF_INET;
   addr.sin_port = htons(port);
   if (host.empty() || host == "0.0.0.0") {
      addr.sin_addr.s_addr = htonl(INADDR_ANY);
      return addr;
   }
   if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1)
      return addr;
   addrinfo hints{};
   hints.ai_family = AF_INET;
   hints.ai_socktype = SOCK_STREAM;
   addrinfo* res = nullptr;
   if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || !res)
      throw TransportError("cannot resolve host '" + host + "'");
   addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
   ::freeaddrinfo(res);
   return addr;
}
//---------------------------------------------------------------------------
std::string describe(const sockaddr_in& addr) {
   char text[INET_ADDRSTRLEN] = {};
   ::inet_ntop(AF_INET, &addr.sin_addr, text, sizeof(text));
   return std::string(text) + ":" + std::to_string(ntohs(addr.sin_port));
}
//---------------------------------------------------------------------------
std::string errno_text(const std::string& what) {
   return what + ": " + std::strerror(errno);
}
//---------------------------------------------------------------------------
} // namespace
//---------------------------------------------------------------------------
std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> make_pipe_pair() {
   auto a_to_b = std::make_shared<Channel>();
   auto b_to_a = std::make_shared<Channel>();
   return {std::make_unique<PipeTransport>(b_to_a, a_to_b, "pipe:a"), std::make_unique<PipeTransport>(a_to_b, b_to_a, "pipe:b")};
}
//---------------------------------------------------------------------------
TcpListener::TcpListener(const std::string& host, std::uint16_t port) {
   sockaddr_in addr = resolve(host, port);
   fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
   if (fd_ < 0)
      throw TransportError(errno_text("socket"));
   int one = 1;
   ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
   if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 || ::listen(fd_, 64) < 0) {
      std::string msg = errno_text("cannot listen on " + describe(addr));
      ::close(fd_);
      throw TransportError(msg);
   }
   socklen_t len = sizeof(addr);
   ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
   port_ = ntohs(addr.sin_port);
}
//---------------------------------------------------------------------------
TcpListener::~TcpListener() {
   if (fd_ >= 0)
      ::close(fd_);
}
//---------------------------------------------------------------------------
std::unique_ptr<Transport> TcpListener::accept(std::chrono::milliseconds timeout) {
   pollfd p{fd_, POLLIN, 0};
   int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
   if (rc <= 0)
      return nullptr;
   sockaddr_in peer{};
   socklen_t len = sizeof(peer);
   int fd = ::accept4(fd_, reinterpret_cast<sockaddr*>(&peer), &len, SOCK_CLOEXEC);
   if (fd < 0)
      return nullptr;
   return std::make_unique<TcpTransport>(fd, describe(peer));
}
//---------------------------------------------------------------------------
std::unique_ptr<Transport> connect_tcp(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout) {
   sockaddr_in addr = resolve(host, port);
   auto deadline = std::chrono::steady_clock::now() + timeout;
   while (true) {
      int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
      if (fd < 0)
         throw TransportError(errno_text("socket"));
      if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0)
         return std::make_unique<TcpTransport>(fd, describe(addr));
      std::string msg = errno_text("cannot connect to " + describe(addr));
      ::close(fd);
      if (std::chrono::steady_clock::now() >= deadline)
         throw TransportError(msg);
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
   }
}
//---------------------------------------------------------------------------
std::pair<std::string, std::uint16_t> parse_address(const std::string& address) {
   auto colon = address.rfind(':');
   if (colon == std::string::npos || colon + 1 == address.size())
      throw TransportError("address must be host:port, got '" + address + "'");
   std::string host = address.substr(0, colon);
   unsigned long port = 0;
   try {
      std::size_t used = 0;
      port = std::stoul(address.substr(colon + 1), &used);
      if (used != address.size() - colon - 1)
         throw std::invalid_argument("trailing");
   } catch (const std::exception&) {
      throw TransportError("bad port in '" + address + "'");
   }
   if (port > 65535)
      throw TransportError("port out of range in '" + address + "'");
   return {host.empty() ? "127.0.0.1" : host, static_cast<std::uint16_t>(port)};
}
//---------------------------------------------------------------------------
} // namespace edgedist::proto
