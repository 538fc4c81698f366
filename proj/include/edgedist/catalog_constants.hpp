#pragma once

#include <array>

namespace edgedist::constants {

// MobileNetV2 model family, level 0 = widest multiplier (least approximate).
// Only the two end-point accuracies are measured values; the four inner
// levels are linear interpolation between them: a_k = 0.925 - k * 0.0192.
inline constexpr std::size_t kDefaultLevels = 6;

inline constexpr std::array<double, kDefaultLevels> kDefaultAlphas = {1.4, 1.3, 1.0, 0.75, 0.5, 0.35};

inline constexpr double kMostAccurateTop5 = 0.925;
inline constexpr double kLeastAccurateTop5 = 0.829;

inline constexpr std::array<double, kDefaultLevels> kDefaultTop5 = {0.925, 0.9058, 0.8866, 0.8674, 0.8482, 0.829};

// Profiled throughput is stored at this resolution (inferences/sec).
inline constexpr double kPerfResolution = 0.01;

} // namespace edgedist::constants
