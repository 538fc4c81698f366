#pragma once

#include "edgedist/core.hpp"
#include "edgedist/proto.hpp"

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <vector>

// Simulated inference executor: per-image latency is lognormal around
// 1/perf, top-5 hits are Bernoulli draws at the catalog accuracy.
namespace edgedist::sim {

inline constexpr double kDefaultNoiseCv = 0.05;
inline constexpr std::int64_t kCalibrationImages = 32;

struct NodeProfile {
   NodeId node_id = 0;
   std::vector<double> perf_per_level;  // true inferences/sec
   double noise_cv = kDefaultNoiseCv;
   std::uint64_t rng_seed = 0;

   /// Throws InvalidArgument on an empty, non-positive or decreasing perf
   /// vector, a negative noise_cv, or a level count different from the catalog.
   void validate(const ModelCatalog& catalog) const;
};

/// splitmix64 over the parts; stable across platforms.
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts);

/// Times a calibration batch per level. Deeper levels are never reported
/// slower than shallower ones.
proto::msg::ProfileReport profile_self(const NodeProfile& profile, const ModelCatalog& catalog);

/// Deterministic in (profile, images, level, seed).
TaskResult run_inference(const NodeProfile& profile, const ModelCatalog& catalog, RequestId request, std::int64_t images, int level, std::uint64_t seed);

/// Exact simulated seconds for `images` at `level` (before millisecond rounding).
double simulated_seconds(const NodeProfile& profile, std::int64_t images, int level, std::uint64_t seed);

/// Profile file: `perf = [..]`, optional `noise_cv`. Throws InvalidArgument.
NodeProfile load_profile_file(const std::filesystem::path& path, NodeId node_id, std::uint64_t seed);
void write_profile_file(const std::filesystem::path& path, const NodeProfile& profile);

} // namespace edgedist::sim
