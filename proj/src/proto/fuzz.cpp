#include "edgedist/proto_fuzz.hpp"

#include <cmath>
#include <limits>

namespace edgedist::proto {
namespace {
//---------------------------------------------------------------------------
template <class T>
T any(std::mt19937_64& rng, T lo = 0, T hi = std::numeric_limits<T>::max()) {
   // Half the draws come from small values, where most real traffic lives.
   if (rng() % 2 == 0)
      hi = std::min<T>(hi, static_cast<T>(lo + 1000));
   return std::uniform_int_distribution<T>(lo, hi)(rng);
}
//---------------------------------------------------------------------------
double any_real(std::mt19937_64& rng) {
   switch (rng() % 4) {
      case 0: return std::round(std::uniform_real_distribution<double>(0, 100)(rng) * 100) / 100;
      case 1: return std::uniform_real_distribution<double>(0, 1)(rng);
      case 2: return std::uniform_real_distribution<double>(-1e300, 1e300)(rng);
      default: return std::ldexp(std::uniform_real_distribution<double>(0.5, 1)(rng), any<int>(rng, -1000, 1000));
   }
}
//---------------------------------------------------------------------------
} // namespace
//---------------------------------------------------------------------------
Message random_message(std::mt19937_64& rng) {
   switch (rng() % 7) {
      case 0: return msg::Hello{any<NodeId>(rng), kProtocolVersion};
      case 1: {
         msg::ProfileReport r{any<NodeId>(rng), {}, {}};
         auto m = any<std::size_t>(rng, 0, 8);
         for (std::size_t i = 0; i < m; ++i) {
            r.perf_column.push_back(any_real(rng));
            r.acc.push_back(any_real(rng));
         }
         return r;
      }
      case 2: return msg::Assign{any<RequestId>(rng), any<std::int64_t>(rng), any<int>(rng), any<std::uint64_t>(rng)};
      case 3: {
         msg::Result r{any<RequestId>(rng), any<NodeId>(rng), any<std::int64_t>(rng), 0, any<std::int64_t>(rng)};
         r.top5_correct = any<std::int64_t>(rng, 0, r.images_done);
         return r;
      }
      case 4: return msg::Ping{};
      case 5: return msg::Pong{};
      default: return msg::Bye{};
   }
}
//---------------------------------------------------------------------------
RoundTripStats check_round_trips(std::size_t count, std::uint64_t seed) {
   std::mt19937_64 rng(seed);
   RoundTripStats stats;
   std::vector<Message> sent;
   std::vector<std::uint8_t> stream;
   auto fail = [&](const std::string& what) {
      if (stats.failures++ == 0)
         stats.first_failure = what;
   };

   for (std::size_t i = 0; i < count; ++i) {
      Message m = random_message(rng);
      auto frame = encode(m);
      try {
         if (!(decode(frame) == m))
            fail("round trip changed " + to_payload(m));
      } catch (const DecodeError& e) {
         fail(std::string(e.what()) + " for " + to_payload(m));
      }
      stream.insert(stream.end(), frame.begin(), frame.end());
      sent.push_back(std::move(m));
      ++stats.messages;
   }

   FrameDecoder decoder;
   std::vector<Message> received;
   std::size_t pos = 0;
   try {
      while (pos < stream.size()) {
         // Mix single bytes, mid-header cuts and multi-frame chunks.
         std::size_t cut = rng() % 3 == 0 ? 1 + rng() % 3 : 1 + rng() % 200;
         cut = std::min(cut, stream.size() - pos);
         decoder.feed(std::span<const std::uint8_t>(stream).subspan(pos, cut));
         pos += cut;
         ++stats.fragments;
         while (auto m = decoder.next())
            received.push_back(std::move(*m));
      }
   } catch (const DecodeError& e) {
      fail(std::string("fragmented stream: ") + e.what());
   }
   if (received.size() != sent.size() || decoder.buffered() != 0) {
      fail("fragmented stream yielded " + std::to_string(received.size()) + " of " + std::to_string(sent.size()) + " messages");
   } else {
      for (std::size_t i = 0; i < sent.size(); ++i)
         if (!(received[i] == sent[i])) {
            fail("fragmented stream differs at message " + std::to_string(i));
            break;
         }
   }
   return stats;
}
//---------------------------------------------------------------------------
} // namespace edgedist::proto
