#include "edgedist/simnode.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace edgedist::sim {
namespace {
//---------------------------------------------------------------------------
std::uint64_t splitmix(std::uint64_t x) {
   x += 0x9e3779b97f4a7c15ULL;
   x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
   x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
   return x ^ (x >> 31);
}
//---------------------------------------------------------------------------
// Sum of `images` latency multipliers with mean 1 and the given CV.
double latency_units(std::mt19937_64& rng, std::int64_t images, double cv) {
   if (cv == 0.0)
      return static_cast<double>(images);
   double sigma2 = std::log1p(cv * cv);
   std::lognormal_distribution<double> jitter(-sigma2 / 2.0, std::sqrt(sigma2));
   double sum = 0.0;
   for (std::int64_t i = 0; i < images; ++i)
      sum += jitter(rng);
   return sum;
}
//---------------------------------------------------------------------------
void check_level(const NodeProfile& profile, int level) {
   if (level < 0 || static_cast<std::size_t>(level) >= profile.perf_per_level.size())
      throw InvalidArgument("level " + std::to_string(level) + " outside the node's profile");
}
//---------------------------------------------------------------------------
} // namespace
//---------------------------------------------------------------------------
void NodeProfile::validate(const ModelCatalog& catalog) const {
   if (perf_per_level.size() != catalog.size())
      throw InvalidArgument("node " + std::to_string(node_id) + ": profile has " + std::to_string(perf_per_level.size()) + " levels, catalog has " +
                            std::to_string(catalog.size()));
   for (std::size_t i = 0; i < perf_per_level.size(); ++i) {
      if (!std::isfinite(perf_per_level[i]) || perf_per_level[i] <= 0.0)
         throw InvalidArgument("node " + std::to_string(node_id) + ": perf must be positive");
      if (i > 0 && perf_per_level[i] < perf_per_level[i - 1])
         throw InvalidArgument("node " + std::to_string(node_id) + ": perf must not decrease with the level");
   }
   if (!std::isfinite(noise_cv) || noise_cv < 0.0)
      throw InvalidArgument("node " + std::to_string(node_id) + ": noise_cv must be >= 0");
}
//---------------------------------------------------------------------------
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
   std::uint64_t h = 0x6a09e667f3bcc909ULL;
   for (auto p : parts)
      h = splitmix(h ^ splitmix(p));
   return h;
}
//---------------------------------------------------------------------------
proto::msg::ProfileReport profile_self(const NodeProfile& profile, const ModelCatalog& catalog) {
   profile.validate(catalog);
   proto::msg::ProfileReport report{profile.node_id, {}, {}};
   double floor = 0.0;
   for (std::size_t level = 0; level < catalog.size(); ++level) {
      std::mt19937_64 rng(derive_seed({profile.rng_seed, 0xca11b, level}));
      double units = latency_units(rng, kCalibrationImages, profile.noise_cv);
      double measured = profile.perf_per_level[level] * static_cast<double>(kCalibrationImages) / units;
      floor = std::max(floor, measured);
      report.perf_column.push_back(floor);
      report.acc.push_back(catalog.accuracy(static_cast<int>(level)));
   }
   return report;
}
//---------------------------------------------------------------------------
double simulated_seconds(const NodeProfile& profile, std::int64_t images, int level, std::uint64_t seed) {
   check_level(profile, level);
   std::mt19937_64 rng(seed);
   return latency_units(rng, images, profile.noise_cv) / profile.perf_per_level[static_cast<std::size_t>(level)];
}
//---------------------------------------------------------------------------
TaskResult run_inference(const NodeProfile& profile, const ModelCatalog& catalog, RequestId request, std::int64_t images, int level, std::uint64_t seed) {
   if (images < 0)
      throw InvalidArgument("negative image count");
   check_level(profile, level);
   TaskResult r{request, profile.node_id, images, 0, 0};
   if (images == 0)
      return r;
   std::mt19937_64 rng(seed);
   double seconds = latency_units(rng, images, profile.noise_cv) / profile.perf_per_level[static_cast<std::size_t>(level)];
   std::binomial_distribution<std::int64_t> hits(images, catalog.accuracy(level));
   r.top5_correct = hits(rng);
   r.elapsed_ms = std::llround(seconds * 1000.0);
   return r;
}
//---------------------------------------------------------------------------
} // namespace edgedist::sim
