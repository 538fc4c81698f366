#include "edgedist/proto.hpp"

#include <json.hpp>

namespace edgedist::proto {
namespace {
//---------------------------------------------------------------------------
using nlohmann::json;
//---------------------------------------------------------------------------
template <class... Ts>
struct Overloaded : Ts... {
   using Ts::operator()...;
};
//---------------------------------------------------------------------------
[[noreturn]] void malformed(const std::string& detail) {
   throw DecodeError(DecodeErrorKind::Malformed, detail);
}
//---------------------------------------------------------------------------
const json& field(const json& j, const char* name) {
   auto it = j.find(name);
   if (it == j.end())
      malformed(std::string("missing field '") + name + "'");
   return *it;
}
//---------------------------------------------------------------------------
std::int64_t get_int(const json& j, const char* name) {
   const json& v = field(j, name);
   if (!v.is_number_integer())
      malformed(std::string("field '") + name + "' must be an integer");
   if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX))
      malformed(std::string("field '") + name + "' out of range");
   return v.get<std::int64_t>();
}
//---------------------------------------------------------------------------
std::int64_t get_non_negative(const json& j, const char* name) {
   std::int64_t v = get_int(j, name);
   if (v < 0)
      malformed(std::string("field '") + name + "' must be non-negative");
   return v;
}
//---------------------------------------------------------------------------
NodeId get_node(const json& j, const char* name) {
   std::int64_t v = get_non_negative(j, name);
   if (v > static_cast<std::int64_t>(UINT32_MAX))
      malformed(std::string("field '") + name + "' out of range");
   return static_cast<NodeId>(v);
}
//---------------------------------------------------------------------------
std::uint64_t get_u64(const json& j, const char* name) {
   const json& v = field(j, name);
   if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      malformed(std::string("field '") + name + "' must be an unsigned integer");
   return v.get<std::uint64_t>();
}
//---------------------------------------------------------------------------
std::vector<double> get_reals(const json& j, const char* name) {
   const json& v = field(j, name);
   if (!v.is_array())
      malformed(std::string("field '") + name + "' must be an array");
   std::vector<double> out;
   for (const auto& x : v) {
      if (!x.is_number())
         malformed(std::string("field '") + name + "' must hold numbers");
      out.push_back(x.get<double>());
   }
   return out;
}
//---------------------------------------------------------------------------
json to_json(const Message& m) {
   json j = std::visit(Overloaded{
                          [](const msg::Hello& x) { return json{{"node_id", x.node_id}, {"protocol_version", x.protocol_version}}; },
                          [](const msg::ProfileReport& x) { return json{{"node_id", x.node_id}, {"perf_column", x.perf_column}, {"acc", x.acc}}; },
                          [](const msg::Assign& x) { return json{{"request_id", x.request_id}, {"images", x.images}, {"level", x.level}, {"seed", x.seed}}; },
                          [](const msg::Result& x) {
                             return json{{"request_id", x.request_id}, {"node_id", x.node_id}, {"images_done", x.images_done}, {"top5_correct", x.top5_correct}, {"elapsed_ms", x.elapsed_ms}};
                          },
                          [](const auto&) { return json::object(); },
                       },
                       m);
   j["type"] = type_name(m);
   return j;
}
//---------------------------------------------------------------------------
std::uint32_t read_length(std::span<const std::uint8_t> header) {
   return (std::uint32_t{header[0]} << 24) | (std::uint32_t{header[1]} << 16) | (std::uint32_t{header[2]} << 8) | std::uint32_t{header[3]};
}
//---------------------------------------------------------------------------
} // namespace
//---------------------------------------------------------------------------
std::string_view type_name(const Message& m) {
   return std::visit(Overloaded{
                        [](const msg::Hello&) { return "Hello"; },
                        [](const msg::ProfileReport&) { return "ProfileReport"; },
                        [](const msg::Assign&) { return "Assign"; },
                        [](const msg::Result&) { return "Result"; },
                        [](const msg::Ping&) { return "Ping"; },
                        [](const msg::Pong&) { return "Pong"; },
                        [](const msg::Bye&) { return "Bye"; },
                     },
                     m);
}
//---------------------------------------------------------------------------
std::string_view to_string(DecodeErrorKind kind) {
   switch (kind) {
      case DecodeErrorKind::Oversize: return "oversize frame";
      case DecodeErrorKind::Malformed: return "malformed payload";
      case DecodeErrorKind::UnknownType: return "unknown message type";
      case DecodeErrorKind::UnsupportedVersion: return "unsupported protocol version";
   }
   return "?";
}
//---------------------------------------------------------------------------
DecodeError::DecodeError(DecodeErrorKind kind, const std::string& detail)
   : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}
//---------------------------------------------------------------------------
std::string to_payload(const Message& m) {
   return to_json(m).dump();
}
//---------------------------------------------------------------------------
Message from_payload(std::string_view payload) {
   json j = json::parse(payload, nullptr, false);
   if (j.is_discarded())
      malformed("payload is not valid JSON");
   if (!j.is_object())
      malformed("payload must be a JSON object");
   const json& type = field(j, "type");
   if (!type.is_string())
      malformed("field 'type' must be a string");
   const auto name = type.get<std::string>();

   if (name == "Hello") {
      std::int64_t version = get_int(j, "protocol_version");
      if (version != kProtocolVersion)
         throw DecodeError(DecodeErrorKind::UnsupportedVersion, "peer speaks version " + std::to_string(version));
      return msg::Hello{get_node(j, "node_id"), static_cast<int>(version)};
   }
   if (name == "ProfileReport") {
      msg::ProfileReport r{get_node(j, "node_id"), get_reals(j, "perf_column"), get_reals(j, "acc")};
      if (r.perf_column.size() != r.acc.size())
         malformed("perf_column and acc differ in length");
      return r;
   }
   if (name == "Assign") {
      msg::Assign a;
      a.request_id = get_u64(j, "request_id");
      a.images = get_non_negative(j, "images");
      std::int64_t level = get_non_negative(j, "level");
      if (level > INT32_MAX)
         malformed("level out of range");
      a.level = static_cast<int>(level);
      a.seed = get_u64(j, "seed");
      return a;
   }
   if (name == "Result") {
      msg::Result r;
      r.request_id = get_u64(j, "request_id");
      r.node_id = get_node(j, "node_id");
      r.images_done = get_non_negative(j, "images_done");
      r.top5_correct = get_non_negative(j, "top5_correct");
      r.elapsed_ms = get_non_negative(j, "elapsed_ms");
      if (r.top5_correct > r.images_done)
         malformed("top5_correct exceeds images_done");
      return r;
   }
   if (name == "Ping")
      return msg::Ping{};
   if (name == "Pong")
      return msg::Pong{};
   if (name == "Bye")
      return msg::Bye{};
   throw DecodeError(DecodeErrorKind::UnknownType, "'" + name + "'");
}
//---------------------------------------------------------------------------
std::vector<std::uint8_t> encode(const Message& m) {
   std::string payload = to_payload(m);
   if (payload.size() > kMaxPayload)
      throw DecodeError(DecodeErrorKind::Oversize, std::to_string(payload.size()) + " bytes");
   auto n = static_cast<std::uint32_t>(payload.size());
   std::vector<std::uint8_t> out{static_cast<std::uint8_t>(n >> 24), static_cast<std::uint8_t>(n >> 16), static_cast<std::uint8_t>(n >> 8), static_cast<std::uint8_t>(n)};
   out.insert(out.end(), payload.begin(), payload.end());
   return out;
}
//---------------------------------------------------------------------------
DecodeStep try_decode(std::span<const std::uint8_t> buffer) {
   if (buffer.size() < kHeaderBytes)
      return {};
   std::uint32_t length = read_length(buffer.first(kHeaderBytes));
   if (length > kMaxPayload)
      throw DecodeError(DecodeErrorKind::Oversize, "frame announces " + std::to_string(length) + " bytes");
   if (buffer.size() < kHeaderBytes + length)
      return {};
   auto payload = buffer.subspan(kHeaderBytes, length);
   return {from_payload({reinterpret_cast<const char*>(payload.data()), payload.size()}), kHeaderBytes + length};
}
//---------------------------------------------------------------------------
Message decode(std::span<const std::uint8_t> frame) {
   auto step = try_decode(frame);
   if (!step.message)
      malformed("incomplete frame");
   if (step.consumed != frame.size())
      malformed("trailing bytes after frame");
   return std::move(*step.message);
}
//---------------------------------------------------------------------------
void FrameDecoder::feed(std::span<const std::uint8_t> bytes) {
   if (offset_ > 0 && offset_ == buffer_.size()) {
      buffer_.clear();
      offset_ = 0;
   }
   buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}
//---------------------------------------------------------------------------
std::optional<Message> FrameDecoder::next() {
   auto step = try_decode(std::span<const std::uint8_t>(buffer_).subspan(offset_));
   offset_ += step.consumed;
   if (offset_ > 4096 && offset_ * 2 > buffer_.size()) {
      buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(offset_));
      offset_ = 0;
   }
   return std::move(step.message);
}
//---------------------------------------------------------------------------
} // namespace edgedist::proto
