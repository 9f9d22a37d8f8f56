#pragma once

// Adversarial training of the operational generator against the operational
// discriminator, with time and spectral reconstruction terms.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "opgan/autodiff.hpp"
#include "opgan/models.hpp"
#include "opgan/signal.hpp"

namespace opgan::training {

struct TrainConfig {
  std::size_t max_iters = 5000;  // one iteration = one D step + one G step
  std::size_t batch = 1;
  double lr_generator = 1e-5;
  double lr_discriminator = 2e-5;
  double lambda_adv = 0.5;
  double lambda_time = 0.1;
  double lambda_stft = 0.1;
  /// Drives weight init (overrides arch.seed) and the epoch shuffles.
  std::uint64_t seed = 1;
  models::ArchitectureConfig arch;
  std::size_t stft_window = signal::kStftWindow;
  std::size_t stft_hop = signal::kStftHop;
  std::size_t checkpoint_interval = 0;  // 0 disables periodic checkpoints
  std::string checkpoint_path;
  std::string loss_csv_path;  // empty disables the CSV log
  bool strict_determinism = false;  // wallclock_ms logged as 0 when set

  /// Throws ConfigError on negative weights, non-positive rates or batch 0.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor3> m;
  std::vector<Tensor3> v;
};

/// Bias-corrected Adam update of params in place. Moments are allocated on
/// the first call; later calls must pass the same shapes.
void adam_step(std::span<ad::Var> params, std::span<const Tensor3> grads, AdamState& state,
               double lr);
/// Uses each parameter's accumulated grad; a parameter without one counts as zero.
void adam_step(std::span<ad::Var> params, AdamState& state, double lr);

// ---------------------------------------------------------------------------
// losses

/// 0.5 * (MAE(real, 1) + MAE(fake, 0))
ad::Var discriminator_loss(const ad::Var& real_scores, const ad::Var& fake_scores);
/// MAE(fake, 1)
ad::Var generator_adv_loss(const ad::Var& fake_scores);
/// Mean absolute sample difference. Throws ConfigError on a shape mismatch.
ad::Var time_loss(const ad::Var& gt, const ad::Var& synth);

/// |STFT| of every batch row: [B, 1, L] -> [B, frames, N/2 + 1]. The gradient
/// at bins with |X| == 0 is taken as zero.
ad::Var stft_magnitude(const ad::Var& x, std::size_t n = signal::kStftWindow,
                       std::size_t hop = signal::kStftHop);
/// Mean absolute difference of the two magnitude spectrograms.
ad::Var stft_loss(const ad::Var& gt, const ad::Var& synth, std::size_t n = signal::kStftWindow,
                  std::size_t hop = signal::kStftHop);

double total_loss(double adv, double time, double stft, const TrainConfig& cfg);
ad::Var total_loss(const ad::Var& adv, const ad::Var& time, const ad::Var& stft,
                   const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// training loop

struct IterationLoss {
  std::size_t iter = 0;  // 1-based
  double adv_g = 0.0;
  double adv_d = 0.0;
  double time = 0.0;
  double stft = 0.0;
  double total = 0.0;
  double wallclock_ms = 0.0;

  bool operator==(const IterationLoss&) const = default;
};

struct TrainReport {
  std::vector<IterationLoss> iterations;
  double wallclock_ms = 0.0;
  std::string checkpoint_path;  // last checkpoint written, if any
};

inline constexpr const char* kLossCsvHeader = "iter,adv_g,adv_d,time,stft,total,wallclock_ms";
std::string loss_csv_row(const IterationLoss& l);

struct GeneratorLosses {
  double adv = 0.0;
  double time = 0.0;
  double stft = 0.0;
  double total = 0.0;
};

/// Resumable training state. Each iteration draws cfg.batch pairs from a
/// seeded per-epoch shuffle, updates D on the detached fake, then updates G
/// on the total loss with D frozen.
class Trainer {
 public:
  Trainer(TrainConfig cfg, std::vector<signal::SegmentPair> pairs);

  /// Restores everything a checkpoint holds; the pairs must be the same set
  /// the run started with. Throws DecodeError on a corrupt file.
  static Trainer resume(const std::string& path, std::vector<signal::SegmentPair> pairs);

  /// Runs one iteration and returns its losses. Throws TrainingDiverged on a
  /// non-finite loss.
  IterationLoss step();
  /// Steps until iteration() == cfg.max_iters, logging and checkpointing.
  const TrainReport& run();

  void save_checkpoint(const std::string& path) const;

  /// Batch tensors for the given pair indices: [B, 1, 1024] zero-padded.
  ad::Var source_batch(std::span<const std::size_t> idx) const;
  ad::Var target_batch(std::span<const std::size_t> idx) const;
  /// Pair indices used by iteration `iter` (0-based).
  std::vector<std::size_t> batch_indices(std::size_t iter) const;

  /// G(x) cropped to the 1000 valid samples.
  ad::Var generate(const ad::Var& source) const;
  /// One D update on a detached fake; returns the D loss before the update.
  double discriminator_step(const ad::Var& source, const ad::Var& target, const ad::Var& fake);
  /// One G update with D frozen; returns the losses before the update.
  GeneratorLosses generator_step(const ad::Var& source, const ad::Var& target,
                                 const ad::Var& fake);

  std::size_t iteration() const noexcept { return iter_; }
  const TrainConfig& config() const noexcept { return cfg_; }
  TrainConfig& config() noexcept { return cfg_; }
  const models::Generator& generator() const noexcept { return gen_; }
  const models::Discriminator& discriminator() const noexcept { return disc_; }
  const AdamState& adam_generator() const noexcept { return adam_g_; }
  const AdamState& adam_discriminator() const noexcept { return adam_d_; }
  const TrainReport& report() const noexcept { return report_; }

 private:
  ad::Var discriminate(const ad::Var& signal_1000, const ad::Var& source) const;
  ad::Var padded_batch(std::span<const std::size_t> idx, bool source) const;

  TrainConfig cfg_;
  std::vector<signal::SegmentPair> pairs_;
  models::Generator gen_;
  models::Discriminator disc_;
  AdamState adam_g_;
  AdamState adam_d_;
  std::size_t iter_ = 0;
  TrainReport report_;
};

struct TrainResult {
  models::Generator generator;
  TrainReport report;
};

/// Fresh run from cfg; the discriminator is dropped from the result.
TrainResult train(const TrainConfig& cfg, const std::vector<signal::SegmentPair>& pairs);

/// Zero-pads a 1000-sample segment to the network length and back.
std::vector<double> pad_to_network(std::span<const double> segment);
std::vector<double> crop_from_network(std::span<const double> output);

}  // namespace opgan::training
