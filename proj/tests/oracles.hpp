#pragma once

// Reference implementations used only by tests. Written against flat vectors with
// hand-computed offsets so they share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

struct Gen {
  explicit Gen(std::uint64_t seed) : rng(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  long integer(long lo, long hi) { return std::uniform_int_distribution<long>(lo, hi)(rng); }
  double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(rng); }
  bool coin() { return integer(0, 1) == 1; }
  std::mt19937_64 rng;
};

/// out[n][o][y][x] = b[o] + sum_{c,i,j} in[n][c][y*s+i-p][x*s+j-p] * w[o][c][i][j]
inline std::vector<double> direct_conv(const std::vector<double>& in, long n, long c, long h, long w,
                                       const std::vector<double>& wt, long oc, long k, const std::vector<double>& b,
                                       long stride, long pad, long& oh, long& ow) {
  oh = (h + 2 * pad - k) / stride + 1;
  ow = (w + 2 * pad - k) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(n * oc * oh * ow), 0.0);
  for (long s = 0; s < n; ++s)
    for (long o = 0; o < oc; ++o)
      for (long y = 0; y < oh; ++y)
        for (long x = 0; x < ow; ++x) {
          double acc = b[static_cast<std::size_t>(o)];
          for (long ch = 0; ch < c; ++ch)
            for (long i = 0; i < k; ++i)
              for (long j = 0; j < k; ++j) {
                const long yy = y * stride + i - pad, xx = x * stride + j - pad;
                if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                acc += in[static_cast<std::size_t>(((s * c + ch) * h + yy) * w + xx)] *
                       wt[static_cast<std::size_t>(((o * c + ch) * k + i) * k + j)];
              }
          out[static_cast<std::size_t>(((s * oc + o) * oh + y) * ow + x)] = acc;
        }
  return out;
}

/// y[r][o] = b[o] + sum_i x[r][i] * w[o][i]
inline std::vector<double> naive_linear(const std::vector<double>& x, long rows, long in, const std::vector<double>& w,
                                        long out, const std::vector<double>& b) {
  std::vector<double> y(static_cast<std::size_t>(rows * out));
  for (long r = 0; r < rows; ++r)
    for (long o = 0; o < out; ++o) {
      double acc = b[static_cast<std::size_t>(o)];
      for (long i = 0; i < in; ++i) acc += x[static_cast<std::size_t>(r * in + i)] * w[static_cast<std::size_t>(o * in + i)];
      y[static_cast<std::size_t>(r * out + o)] = acc;
    }
  return y;
}

/// Fraction of (positive, negative) pairs ordered correctly, ties counting 1/2.
inline double mann_whitney(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double relative_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-12});
  return std::abs(a - b) / scale;
}

}  // namespace oracle
