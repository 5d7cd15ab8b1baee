#pragma once

// 1D filters over per-frame series.

#include <algorithm>
#include <cmath>
#include <vector>

namespace ptzcap {

/// Sliding median with an odd window; samples past either end replicate the edge value.
inline std::vector<double> median_filter(const std::vector<double>& x, int window) {
  if (x.empty() || window <= 1) return x;
  const int half = window / 2;
  const int n = static_cast<int>(x.size());
  std::vector<double> out(x.size()), buf(2 * half + 1);
  for (int i = 0; i < n; ++i) {
    for (int k = -half; k <= half; ++k) buf[k + half] = x[std::clamp(i + k, 0, n - 1)];
    std::nth_element(buf.begin(), buf.begin() + half, buf.end());
    out[i] = buf[half];
  }
  return out;
}

/// Gaussian taps w_k = exp(-k^2 / (2 sigma^2)), k = -r..r with r = round(4 sigma). Unnormalized.
inline std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(4.0 * sigma + 0.5);
  std::vector<double> w(2 * radius + 1);
  for (int k = -radius; k <= radius; ++k) w[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
  return w;
}

/// Gaussian smoothing; near the ends only in-range taps are used and renormalized.
/// sigma <= 0 returns the input unchanged.
inline std::vector<double> gaussian_smooth(const std::vector<double>& x, double sigma) {
  if (x.empty() || sigma <= 0.0) return x;
  const auto w = gaussian_kernel(sigma);
  const int radius = static_cast<int>(w.size() / 2);
  const int n = static_cast<int>(x.size());
  std::vector<double> out(x.size());
  for (int i = 0; i < n; ++i) {
    double acc = 0.0, norm = 0.0;
    for (int k = std::max(-radius, -i); k <= std::min(radius, n - 1 - i); ++k) {
      acc += w[k + radius] * x[i + k];
      norm += w[k + radius];
    }
    out[i] = acc / norm;
  }
  return out;
}

}  // namespace ptzcap
