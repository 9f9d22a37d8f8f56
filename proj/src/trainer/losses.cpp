#include <cmath>
#include <complex>
#include <numbers>
#include <optional>

#include "opgan/error.hpp"
#include "opgan/trainer.hpp"

namespace opgan::training {

using ad::Var;

ad::Var discriminator_loss(const Var& real_scores, const Var& fake_scores) {
  if (!(real_scores.shape() == fake_scores.shape())) {
    throw ConfigError("score shapes differ: " + real_scores.shape().str() + " vs " +
                      fake_scores.shape().str());
  }
  const Var real_term = ad::l1_loss(real_scores, Var::full(real_scores.shape(), 1.0));
  const Var fake_term = ad::l1_loss(fake_scores, Var::full(fake_scores.shape(), 0.0));
  return ad::scale(ad::add(real_term, fake_term), 0.5);
}

ad::Var generator_adv_loss(const Var& fake_scores) {
  return ad::l1_loss(fake_scores, Var::full(fake_scores.shape(), 1.0));
}

ad::Var time_loss(const Var& gt, const Var& synth) {
  if (!(gt.shape() == synth.shape())) {
    throw ConfigError("time loss needs equal shapes, got " + gt.shape().str() + " and " +
                      synth.shape().str());
  }
  return ad::l1_loss(gt, synth);
}

ad::Var stft_magnitude(const Var& x, std::size_t n, std::size_t hop) {
  const Shape in = x.shape();
  if (in.channels != 1) throw ConfigError("stft_magnitude expects single-channel input");
  const std::size_t frames = signal::stft_frame_count(in.length, n, hop);
  const std::size_t bins = n / 2 + 1;

  // Unit phasors X/|X| are kept for the backward pass.
  auto phase = std::make_shared<std::vector<std::complex<double>>>(in.batch * frames * bins);
  Tensor3 mag({in.batch, frames, bins}, 0.0);
  for (std::size_t b = 0; b < in.batch; ++b) {
    const auto s = signal::stft(x.value().row(b, 0), n, hop);
    for (std::size_t i = 0; i < frames * bins; ++i) {
      const double a = std::abs(s.frames[i]);
      mag.values()[b * frames * bins + i] = a;
      (*phase)[b * frames * bins + i] = a > 0.0 ? s.frames[i] / a : 0.0;
    }
  }

  auto fn = [phase, in, n, hop, frames, bins](const Tensor3& up, std::span<Tensor3* const> g) {
    if (!g[0]) return;
    // d|X_k| / dx_m = w_m Re(U_k e^{+j 2 pi k m / N}); the sum over k is the
    // real part of a forward FFT of conj(g_k U_k).
    const auto w = signal::hanning(n);
    const bool fast = signal::is_power_of_two(n);
    std::optional<signal::Fft> fft;
    if (fast) fft.emplace(n);
    std::vector<std::complex<double>> buf(n);
    for (std::size_t b = 0; b < in.batch; ++b) {
      auto dx = g[0]->row(b, 0);
      for (std::size_t f = 0; f < frames; ++f) {
        const std::size_t base = (b * frames + f) * bins;
        std::fill(buf.begin(), buf.end(), 0.0);
        for (std::size_t k = 0; k < bins; ++k) {
          buf[k] = std::conj(up.values()[base + k] * (*phase)[base + k]);
        }
        if (fast) {
          fft->forward(buf);
        } else {
          std::vector<std::complex<double>> out(n);
          for (std::size_t m = 0; m < n; ++m) {
            for (std::size_t k = 0; k < bins; ++k) {
              out[m] += buf[k] * std::polar(1.0, -2.0 * std::numbers::pi *
                                                     static_cast<double>(k * m % n) /
                                                     static_cast<double>(n));
            }
          }
          buf = out;
        }
        for (std::size_t m = 0; m < n; ++m) dx[f * hop + m] += w[m] * buf[m].real();
      }
    }
  };
  return Var::make_result(std::move(mag), {x}, fn, "stft_magnitude");
}

ad::Var stft_loss(const Var& gt, const Var& synth, std::size_t n, std::size_t hop) {
  if (!(gt.shape() == synth.shape())) {
    throw ConfigError("stft loss needs equal shapes, got " + gt.shape().str() + " and " +
                      synth.shape().str());
  }
  return ad::l1_loss(stft_magnitude(gt, n, hop), stft_magnitude(synth, n, hop));
}

double total_loss(double adv, double time, double stft, const TrainConfig& cfg) {
  return cfg.lambda_adv * adv + cfg.lambda_time * time + cfg.lambda_stft * stft;
}

ad::Var total_loss(const Var& adv, const Var& time, const Var& stft, const TrainConfig& cfg) {
  return ad::add(ad::add(ad::scale(adv, cfg.lambda_adv), ad::scale(time, cfg.lambda_time)),
                 ad::scale(stft, cfg.lambda_stft));
}

}  // namespace opgan::training
