#include "doctest.h"

#include "edgedist/simnode.hpp"
#include "edgedist/worker.hpp"
#include "support/binomial.hpp"

#include <array>
#include <filesystem>

using namespace edgedist;
using namespace edgedist::sim;
using namespace std::chrono_literals;

namespace {

NodeProfile two_level(double cv, std::uint64_t seed = 1) {
   return NodeProfile{3, {4, 8}, cv, seed};
}

NodeProfile six_level(double cv, std::uint64_t seed = 1) {
   return NodeProfile{2, {8, 10, 13, 16, 20, 25}, cv, seed};
}

std::optional<proto::Message> next_message(proto::Transport& t, proto::FrameDecoder& decoder, std::chrono::milliseconds timeout) {
   auto deadline = std::chrono::steady_clock::now() + timeout;
   std::array<std::uint8_t, 4096> buf{};
   while (std::chrono::steady_clock::now() < deadline) {
      if (auto m = decoder.next())
         return m;
      auto r = t.read_some(buf, 20ms);
      if (r.status == proto::ReadStatus::Closed)
         return decoder.next();
      if (r.status == proto::ReadStatus::Data)
         decoder.feed(std::span<const std::uint8_t>(buf.data(), r.bytes));
   }
   return std::nullopt;
}

} // namespace

TEST_CASE("Empty assignment takes no time") {
   auto r = run_inference(six_level(0.05), default_catalog(), 9, 0, 2, 77);
   CHECK(r.images_done == 0);
   CHECK(r.top5_correct == 0);
   CHECK(r.elapsed_ms == 0);
   CHECK(r.request_id == 9);
   CHECK(r.node == 2);
}

TEST_CASE("Noise-free latency is exact") {
   NodeProfile p{1, {8, 8, 10, 12, 14, 16}, 0.0, 5};
   CHECK(simulated_seconds(p, 40, 0, 123) == 5.0);
   auto r = run_inference(p, default_catalog(), 1, 40, 0, 123);
   CHECK(r.elapsed_ms == 5000);
   CHECK(r.images_done == 40);
}

TEST_CASE("Noise-free calibration reports the true table") {
   auto p = six_level(0.0);
   auto report = profile_self(p, default_catalog());
   CHECK(report.node_id == 2);
   CHECK(report.perf_column == p.perf_per_level);
   CHECK(report.acc.size() == 6);
   CHECK(report.acc[0] == doctest::Approx(0.925));
}

TEST_CASE("Calibration stays within 10 percent under 5 percent jitter") {
   auto catalog = default_catalog().truncated(2);
   for (std::uint64_t seed = 0; seed < 500; ++seed) {
      auto report = profile_self(two_level(0.05, seed), catalog);
      CHECK(std::abs(report.perf_column[0] - 4.0) <= 0.4);
      CHECK(std::abs(report.perf_column[1] - 8.0) <= 0.8);
      CHECK(report.perf_column[0] <= report.perf_column[1]);
   }
}

TEST_CASE("Calibration is deterministic per seed") {
   auto catalog = default_catalog();
   CHECK(profile_self(six_level(0.05, 42), catalog) == profile_self(six_level(0.05, 42), catalog));
   CHECK_FALSE(profile_self(six_level(0.05, 42), catalog) == profile_self(six_level(0.05, 43), catalog));
}

TEST_CASE("Inference is deterministic and conserves images") {
   auto catalog = default_catalog();
   auto p = six_level(0.05);
   for (std::int64_t images : {1, 7, 100, 650}) {
      auto a = run_inference(p, catalog, 4, images, 3, 99);
      CHECK(a == run_inference(p, catalog, 4, images, 3, 99));
      CHECK(a.images_done == images);
      CHECK(a.top5_correct <= images);
   }
   CHECK_FALSE(run_inference(p, catalog, 4, 650, 3, 99) == run_inference(p, catalog, 4, 650, 3, 100));
}

TEST_CASE("Top-5 accuracy concentrates at 10^4 images") {
   // Exact binomial tail: well under the 1 percent budget.
   double outside = testing::binomial_outside(10000, 0.925, 0.01);
   CHECK(outside < 0.01);
   CHECK(outside > 0.0);

   auto catalog = default_catalog();
   int misses = 0;
   for (std::uint64_t seed = 0; seed < 50; ++seed) {
      auto r = run_inference(six_level(0.05, seed), catalog, 1, 10000, 0, seed);
      double empirical = static_cast<double>(r.top5_correct) / 10000.0;
      misses += std::abs(empirical - 0.925) > 0.01;
   }
   CHECK(misses == 0);
}

TEST_CASE("Achieved throughput tracks the profile within 3 CV") {
   auto catalog = default_catalog();
   auto p = six_level(0.05);
   for (std::uint64_t seed = 0; seed < 100; ++seed)
      for (int level = 0; level < 6; ++level) {
         std::int64_t images = 100 + static_cast<std::int64_t>(seed) * 7;
         double seconds = simulated_seconds(p, images, level, seed);
         double achieved = static_cast<double>(images) / seconds;
         double truth = p.perf_per_level[static_cast<std::size_t>(level)];
         CHECK(std::abs(achieved - truth) <= 3 * 0.05 * truth);
      }
}

TEST_CASE("Profiles are validated") {
   auto catalog = default_catalog();
   CHECK_THROWS_AS(profile_self(two_level(0.05), catalog), InvalidArgument);
   CHECK_THROWS_AS(profile_self(NodeProfile{1, {8, 7, 9, 10, 11, 12}, 0.0, 0}, catalog), InvalidArgument);
   CHECK_THROWS_AS(profile_self(NodeProfile{1, {8, 8, 9, 10, 11, 12}, -0.1, 0}, catalog), InvalidArgument);
   CHECK_THROWS_AS(run_inference(six_level(0), catalog, 1, 10, 6, 0), InvalidArgument);
   CHECK_THROWS_AS(run_inference(six_level(0), catalog, 1, -1, 0, 0), InvalidArgument);
}

TEST_CASE("Profile file round trip") {
   auto path = std::filesystem::temp_directory_path() / "edgedist_profile_test.toml";
   write_profile_file(path, NodeProfile{5, {6, 8, 10, 13, 16, 20}, 0.02, 0});
   auto back = load_profile_file(path, 5, 11);
   CHECK(back.perf_per_level == std::vector<double>{6, 8, 10, 13, 16, 20});
   CHECK(back.noise_cv == 0.02);
   CHECK(back.rng_seed == 11);
   std::filesystem::remove(path);
}

TEST_CASE("Derived seeds depend on every part") {
   CHECK(derive_seed({1, 2, 3}) == derive_seed({1, 2, 3}));
   CHECK(derive_seed({1, 2, 3}) != derive_seed({1, 3, 2}));
   CHECK(derive_seed({1, 2}) != derive_seed({1, 2, 0}));
}

TEST_CASE("Worker serves queued assignments in order") {
   auto [gw, link] = proto::make_pipe_pair();
   auto profile = six_level(0.0);
   WorkerRuntime worker(profile, default_catalog(), std::move(link), {1000.0, std::nullopt, {}});
   worker.start();

   proto::FrameDecoder decoder;
   auto hello = next_message(*gw, decoder, 1s);
   REQUIRE(hello);
   CHECK(std::get<proto::msg::Hello>(*hello).node_id == 2);
   auto report = next_message(*gw, decoder, 1s);
   REQUIRE(report);
   CHECK(std::get<proto::msg::ProfileReport>(*report).perf_column == profile.perf_per_level);

   REQUIRE(gw->write_all(proto::encode(proto::msg::Assign{7, 80, 0, 1})));
   REQUIRE(gw->write_all(proto::encode(proto::msg::Assign{7, 50, 4, 2})));
   auto first = next_message(*gw, decoder, 2s);
   auto second = next_message(*gw, decoder, 2s);
   REQUIRE(first);
   REQUIRE(second);
   auto r1 = std::get<proto::msg::Result>(*first);
   auto r2 = std::get<proto::msg::Result>(*second);
   CHECK(r1.images_done == 80);
   CHECK(r1.elapsed_ms == 10000);
   CHECK(r2.images_done == 50);
   CHECK(r2.elapsed_ms == 2500);
   CHECK(worker.images_done() == 130);

   gw->close();
   worker.wait();
   CHECK(worker.finished());
   CHECK(worker.error().empty());
}

TEST_CASE("Fault plan drops the link mid-assignment without a result") {
   auto [gw, link] = proto::make_pipe_pair();
   WorkerRuntime worker(six_level(0.0), default_catalog(), std::move(link), {100.0, FaultPlan{3, 0.5}, {}});
   worker.start();
   proto::FrameDecoder decoder;
   REQUIRE(next_message(*gw, decoder, 1s));
   REQUIRE(next_message(*gw, decoder, 1s));

   REQUIRE(gw->write_all(proto::encode(proto::msg::Assign{2, 8, 0, 1})));
   auto ok = next_message(*gw, decoder, 2s);
   REQUIRE(ok);
   CHECK(std::get<proto::msg::Result>(*ok).request_id == 2);

   auto sent = std::chrono::steady_clock::now();
   REQUIRE(gw->write_all(proto::encode(proto::msg::Assign{3, 80, 0, 1})));
   auto none = next_message(*gw, decoder, 2s);
   CHECK_FALSE(none.has_value());
   worker.wait();
   // 10 s of simulated work at 100x, cut at half.
   CHECK(std::chrono::steady_clock::now() - sent >= 45ms);
   CHECK(worker.images_done() == 8);
}

TEST_CASE("Worker rejects an assignment outside the catalog") {
   auto [gw, link] = proto::make_pipe_pair();
   WorkerRuntime worker(six_level(0.0), default_catalog(), std::move(link), {1000.0, std::nullopt, {}});
   worker.start();
   proto::FrameDecoder decoder;
   REQUIRE(next_message(*gw, decoder, 1s));
   REQUIRE(next_message(*gw, decoder, 1s));
   REQUIRE(gw->write_all(proto::encode(proto::msg::Assign{1, 10, 6, 1})));
   worker.wait();
   CHECK(worker.error().find("invalid assignment") != std::string::npos);
}
