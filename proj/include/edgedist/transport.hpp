#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>

namespace edgedist::proto {

class TransportError : public std::runtime_error {
 public:
   using std::runtime_error::runtime_error;
};

enum class ReadStatus { Data, Timeout, Closed };

struct ReadResult {
   ReadStatus status = ReadStatus::Closed;
   std::size_t bytes = 0;
};

/// Ordered, reliable byte stream. read_some is called from one thread;
/// write_all and close may be called from any thread.
class Transport {
 public:
   virtual ~Transport() = default;
   virtual ReadResult read_some(std::span<std::uint8_t> buffer, std::chrono::milliseconds timeout) = 0;
   /// False once the stream is closed.
   virtual bool write_all(std::span<const std::uint8_t> bytes) = 0;
   /// Idempotent; wakes a blocked reader.
   virtual void close() = 0;
   virtual std::string peer() const = 0;
};

/// Two connected in-memory endpoints. Bytes written before a close remain
/// readable by the other side.
std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> make_pipe_pair();

class TcpListener {
 public:
   /// Port 0 picks a free port. Throws TransportError.
   TcpListener(const std::string& host, std::uint16_t port);
   ~TcpListener();
   TcpListener(const TcpListener&) = delete;
   TcpListener& operator=(const TcpListener&) = delete;

   std::uint16_t port() const { return port_; }
   /// nullptr on timeout.
   std::unique_ptr<Transport> accept(std::chrono::milliseconds timeout);

 private:
   int fd_ = -1;
   std::uint16_t port_ = 0;
};

/// Retries until `timeout`; throws TransportError.
std::unique_ptr<Transport> connect_tcp(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout);

/// "host:port" -> parts; throws TransportError.
std::pair<std::string, std::uint16_t> parse_address(const std::string& address);

} // namespace edgedist::proto
