#include "opgan/signal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "opgan/error.hpp"

namespace opgan::signal {

std::string to_string(Sensor s) {
  switch (s) {
    case Sensor::kAndroid: return "android";
    case Sensor::kIphone: return "iphone";
    case Sensor::kCsn: return "csn";
    case Sensor::kEpisensor: return "episensor";
    case Sensor::kOther: return "other";
  }
  return "other";
}

Sensor sensor_from_string(const std::string& s) {
  if (s == "android") return Sensor::kAndroid;
  if (s == "iphone") return Sensor::kIphone;
  if (s == "csn") return Sensor::kCsn;
  if (s == "episensor") return Sensor::kEpisensor;
  if (s == "other") return Sensor::kOther;
  throw ConfigError("unknown sensor '" + s + "' (android|iphone|csn|episensor|other)");
}

std::size_t resample_factor(Sensor s) {
  switch (s) {
    case Sensor::kCsn: return 4;
    case Sensor::kIphone: return 2;
    default: return 1;
  }
}

double default_sampling_rate(Sensor s) { return kTargetRate / static_cast<double>(resample_factor(s)); }

std::vector<std::vector<double>> segment_waveform(const Waveform& w, double seg_seconds) {
  if (!(w.fs > 0.0)) throw ConfigError("sampling rate must be positive");
  if (!(seg_seconds > 0.0)) throw ConfigError("segment duration must be positive");
  const auto len = static_cast<std::size_t>(std::llround(seg_seconds * w.fs));
  std::vector<std::vector<double>> out;
  if (len == 0) return out;
  for (std::size_t start = 0; start + len <= w.samples.size(); start += len) {
    out.emplace_back(w.samples.begin() + static_cast<long>(start),
                     w.samples.begin() + static_cast<long>(start + len));
  }
  return out;
}

std::vector<double> resample_linear(std::span<const double> x, std::size_t factor) {
  if (factor == 0) throw ConfigError("resample factor must be >= 1");
  std::vector<double> out(x.size() * factor);
  const double inv = 1.0 / static_cast<double>(factor);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = x[i];
    const double b = i + 1 < x.size() ? x[i + 1] : x[i];
    for (std::size_t r = 0; r < factor; ++r) {
      const double t = static_cast<double>(r) * inv;
      out[i * factor + r] = r == 0 ? a : a + t * (b - a);
    }
  }
  return out;
}

Normalized normalize(std::span<const double> x) {
  if (x.empty()) throw DegenerateSegment("cannot normalize an empty segment");
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  const SegmentStats stats{*lo, *hi};
  if (!(stats.max > stats.min)) {
    throw DegenerateSegment("constant segment (min == max == " + std::to_string(stats.min) + ")");
  }
  const double range = stats.max - stats.min;
  Normalized n{std::vector<double>(x.size()), stats};
  for (std::size_t i = 0; i < x.size(); ++i) n.values[i] = 2.0 * (x[i] - stats.min) / range - 1.0;
  return n;
}

std::vector<double> denormalize(std::span<const double> x_n, const SegmentStats& stats) {
  if (!(stats.max > stats.min)) throw DegenerateSegment("degenerate normalization stats");
  const double half = 0.5 * (stats.max - stats.min);
  std::vector<double> out(x_n.size());
  for (std::size_t i = 0; i < x_n.size(); ++i) out[i] = (x_n[i] + 1.0) * half + stats.min;
  return out;
}

std::vector<double> hanning(std::size_t n) {
  if (n < 2) throw ConfigError("Hanning window needs N >= 2");
  std::vector<double> w(n);
  const double denom = static_cast<double>(n - 1);
  for (std::size_t m = 0; m < n; ++m) {
    w[m] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(m) / denom));
  }
  w.front() = 0.0;
  w.back() = 0.0;
  return w;
}

// ---------------------------------------------------------------------------
// FFT

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

Fft::Fft(std::size_t n) : n_(n) {
  if (!is_power_of_two(n)) throw ConfigError("FFT size " + std::to_string(n) + " is not a power of two");
  twiddles_.resize(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    twiddles_[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
  }
  bitrev_.resize(n);
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < bits; ++b) {
      if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
    }
    bitrev_[i] = r;
  }
}

void Fft::forward(std::span<std::complex<double>> a) const {
  if (a.size() != n_) throw ConfigError("FFT buffer size mismatch");
  for (std::size_t i = 0; i < n_; ++i) {
    if (i < bitrev_[i]) std::swap(a[i], a[bitrev_[i]]);
  }
  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = n_ / len;
    for (std::size_t start = 0; start < n_; start += len) {
      for (std::size_t j = 0; j < half; ++j) {
        const std::complex<double> t = twiddles_[j * step] * a[start + j + half];
        a[start + j + half] = a[start + j] - t;
        a[start + j] += t;
      }
    }
  }
}

namespace {

/// One-sided spectrum of a real block (zero-padded to n).
void real_spectrum(std::span<const double> block, std::size_t n, const Fft* fft,
                   std::span<std::complex<double>> out) {
  const std::size_t bins = n / 2 + 1;
  if (fft) {
    std::vector<std::complex<double>> buf(n);
    for (std::size_t i = 0; i < block.size(); ++i) buf[i] = block[i];
    fft->forward(buf);
    std::copy(buf.begin(), buf.begin() + static_cast<long>(bins), out.begin());
    return;
  }
  for (std::size_t k = 0; k < bins; ++k) {
    std::complex<double> s = 0.0;
    for (std::size_t m = 0; m < block.size(); ++m) {
      s += block[m] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * m % n) /
                                          static_cast<double>(n));
    }
    out[k] = s;
  }
}

}  // namespace

std::size_t stft_frame_count(std::size_t length, std::size_t n, std::size_t hop) {
  if (hop < 1) throw ConfigError("STFT hop must be >= 1");
  if (length < n) {
    throw ConfigError("signal of " + std::to_string(length) + " samples is shorter than the " +
                      std::to_string(n) + "-point STFT window");
  }
  return (length - n) / hop + 1;
}

Spectrogram stft(std::span<const double> x, std::size_t n, std::size_t hop) {
  Spectrogram s;
  s.window = n;
  s.hop = hop;
  s.n_frames = stft_frame_count(x.size(), n, hop);
  s.n_bins = n / 2 + 1;
  s.frames.resize(s.n_frames * s.n_bins);
  const auto w = hanning(n);
  const bool fast = is_power_of_two(n);
  const Fft fft(fast ? n : 1);
  std::vector<double> block(n);
  for (std::size_t f = 0; f < s.n_frames; ++f) {
    for (std::size_t m = 0; m < n; ++m) block[m] = x[f * hop + m] * w[m];
    real_spectrum(block, n, fast ? &fft : nullptr,
                  std::span(s.frames).subspan(f * s.n_bins, s.n_bins));
  }
  return s;
}

std::vector<double> spectrogram_power(const Spectrogram& s) {
  std::vector<double> p(s.frames.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::norm(s.frames[i]);
  return p;
}

std::vector<double> spectrogram_magnitude(const Spectrogram& s) {
  std::vector<double> p(s.frames.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::abs(s.frames[i]);
  return p;
}

std::vector<double> magnitude_spectrum(std::span<const double> x, std::size_t nfft) {
  if (x.size() > nfft) {
    throw ConfigError("segment of " + std::to_string(x.size()) + " samples exceeds nfft " +
                      std::to_string(nfft));
  }
  const bool fast = is_power_of_two(nfft);
  const Fft fft(fast ? nfft : 1);
  std::vector<std::complex<double>> spec(nfft / 2 + 1);
  real_spectrum(x, nfft, fast ? &fft : nullptr, spec);
  std::vector<double> mag(spec.size());
  const double inv = 1.0 / static_cast<double>(nfft);
  for (std::size_t k = 0; k < spec.size(); ++k) mag[k] = std::abs(spec[k]) * inv;
  return mag;
}

std::string spectrogram_csv(const Spectrogram& s, double fs) {
  std::string out;
  char buf[64];
  for (std::size_t k = 0; k < s.n_bins; ++k) {
    std::snprintf(buf, sizeof buf, "%s%.6g", k ? "," : "", s.bin_frequency(k, fs));
    out += buf;
  }
  out += '\n';
  const auto p = spectrogram_power(s);
  for (std::size_t f = 0; f < s.n_frames; ++f) {
    for (std::size_t k = 0; k < s.n_bins; ++k) {
      std::snprintf(buf, sizeof buf, "%s%.17g", k ? "," : "", p[f * s.n_bins + k]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace opgan::signal
