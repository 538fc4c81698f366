#pragma once

#include "edgedist/core.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

// Gateway <-> node wire format. Every frame is a 4-byte big-endian payload
// length followed by a compact JSON object whose "type" field names the
// message.
namespace edgedist::proto {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kHeaderBytes = 4;
inline constexpr std::size_t kMaxPayload = 1u << 20;
inline constexpr std::uint16_t kDefaultPort = 7707;

namespace msg {
struct Hello {
   NodeId node_id = 0;
   int protocol_version = kProtocolVersion;
   friend bool operator==(const Hello&, const Hello&) = default;
};
struct ProfileReport {
   NodeId node_id = 0;
   std::vector<double> perf_column;
   std::vector<double> acc;
   friend bool operator==(const ProfileReport&, const ProfileReport&) = default;
};
struct Assign {
   RequestId request_id = 0;
   std::int64_t images = 0;
   int level = 0;
   std::uint64_t seed = 0;
   friend bool operator==(const Assign&, const Assign&) = default;
};
struct Result {
   RequestId request_id = 0;
   NodeId node_id = 0;
   std::int64_t images_done = 0;
   std::int64_t top5_correct = 0;
   std::int64_t elapsed_ms = 0;
   friend bool operator==(const Result&, const Result&) = default;
};
struct Ping {
   friend bool operator==(const Ping&, const Ping&) = default;
};
struct Pong {
   friend bool operator==(const Pong&, const Pong&) = default;
};
struct Bye {
   friend bool operator==(const Bye&, const Bye&) = default;
};
} // namespace msg

using Message = std::variant<msg::Hello, msg::ProfileReport, msg::Assign, msg::Result, msg::Ping, msg::Pong, msg::Bye>;

std::string_view type_name(const Message& m);

enum class DecodeErrorKind { Oversize, Malformed, UnknownType, UnsupportedVersion };
std::string_view to_string(DecodeErrorKind kind);

class DecodeError : public std::runtime_error {
 public:
   DecodeError(DecodeErrorKind kind, const std::string& detail);
   DecodeErrorKind kind() const { return kind_; }

 private:
   DecodeErrorKind kind_;
};

/// Canonical JSON text of `m` (keys sorted, no whitespace).
std::string to_payload(const Message& m);
/// Parses and validates a payload; throws DecodeError.
Message from_payload(std::string_view payload);

/// Length prefix + payload.
std::vector<std::uint8_t> encode(const Message& m);

/// Decodes exactly one complete frame; throws DecodeError on anything else.
Message decode(std::span<const std::uint8_t> frame);

struct DecodeStep {
   std::optional<Message> message;  // empty: more bytes needed
   std::size_t consumed = 0;        // 0 unless a message was produced
};

/// Decodes the first frame in `buffer` if it is complete. An oversize length
/// prefix is reported as soon as the header is visible.
DecodeStep try_decode(std::span<const std::uint8_t> buffer);

/// Reassembles frames from an arbitrarily fragmented byte stream.
class FrameDecoder {
 public:
   void feed(std::span<const std::uint8_t> bytes);
   /// Next complete message, if any. Throws DecodeError.
   std::optional<Message> next();
   std::size_t buffered() const { return buffer_.size() - offset_; }

 private:
   std::vector<std::uint8_t> buffer_;
   std::size_t offset_ = 0;
};

} // namespace edgedist::proto
