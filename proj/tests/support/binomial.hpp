#pragma once

#include <cmath>
#include <cstdint>

namespace edgedist::testing {

/// Exact P(|X/n - p| > eps) for X ~ Binomial(n, p), summed in log space.
inline double binomial_outside(std::int64_t n, double p, double eps) {
   double lo = std::ceil((p - eps) * static_cast<double>(n) - 1e-9);
   double hi = std::floor((p + eps) * static_cast<double>(n) + 1e-9);
   double outside = 0.0;
   double log_n = std::lgamma(static_cast<double>(n) + 1.0);
   for (std::int64_t k = 0; k <= n; ++k) {
      auto kd = static_cast<double>(k);
      if (kd >= lo && kd <= hi)
         continue;
      double log_pmf = log_n - std::lgamma(kd + 1.0) - std::lgamma(static_cast<double>(n - k) + 1.0) + kd * std::log(p) +
                       static_cast<double>(n - k) * std::log1p(-p);
      outside += std::exp(log_pmf);
   }
   return outside;
}

} // namespace edgedist::testing
