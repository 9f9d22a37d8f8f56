#pragma once

// Direct O(N^2) DFT used as an independent reference for the FFT-based code.

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

namespace opgan::testing {

inline std::vector<std::complex<double>> direct_dft(std::span<const double> x, std::size_t n,
                                                    std::size_t bins) {
  std::vector<std::complex<double>> out(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    long double re = 0.0L, im = 0.0L;
    for (std::size_t m = 0; m < x.size(); ++m) {
      const long double ang = -2.0L * std::numbers::pi_v<long double> *
                              static_cast<long double>((k * m) % n) / static_cast<long double>(n);
      re += x[m] * std::cos(ang);
      im += x[m] * std::sin(ang);
    }
    out[k] = {static_cast<double>(re), static_cast<double>(im)};
  }
  return out;
}

/// Hanning-windowed direct DFT of frame f, one-sided bins.
inline std::vector<std::complex<double>> direct_stft_frame(std::span<const double> x, std::size_t f,
                                                           std::size_t n, std::size_t hop) {
  std::vector<double> block(n);
  for (std::size_t m = 0; m < n; ++m) {
    const double w = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * m / (n - 1.0)));
    block[m] = x[f * hop + m] * w;
  }
  return direct_dft(block, n, n / 2 + 1);
}

/// max |a - b| / max |b|
inline double normwise_rel_err(std::span<const std::complex<double>> a,
                               std::span<const std::complex<double>> b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return den == 0.0 ? num : num / den;
}

}  // namespace opgan::testing

namespace opgan::testing {

/// Direct N-point DFT with a precomputed long-double phasor table, for sweeps
/// over many frames.
class DirectDft {
 public:
  explicit DirectDft(std::size_t n) : n_(n), cos_(n), sin_(n), window_(n) {
    for (std::size_t i = 0; i < n; ++i) {
      const long double ang = -2.0L * std::numbers::pi_v<long double> * static_cast<long double>(i) /
                              static_cast<long double>(n);
      cos_[i] = std::cos(ang);
      sin_[i] = std::sin(ang);
      window_[i] = 0.5L * (1.0L - std::cos(2.0L * std::numbers::pi_v<long double> *
                                           static_cast<long double>(i) /
                                           static_cast<long double>(n - 1)));
    }
  }

  /// Hanning-windowed one-sided spectrum of x[start, start + N).
  std::vector<std::complex<double>> frame(std::span<const double> x, std::size_t start) const {
    std::vector<std::complex<double>> out(n_ / 2 + 1);
    for (std::size_t k = 0; k < out.size(); ++k) {
      long double re = 0.0L, im = 0.0L;
      for (std::size_t m = 0; m < n_; ++m) {
        const long double v = window_[m] * x[start + m];
        const std::size_t idx = (k * m) % n_;
        re += v * cos_[idx];
        im += v * sin_[idx];
      }
      out[k] = {static_cast<double>(re), static_cast<double>(im)};
    }
    return out;
  }

 private:
  std::size_t n_;
  std::vector<long double> cos_, sin_, window_;
};

}  // namespace opgan::testing
