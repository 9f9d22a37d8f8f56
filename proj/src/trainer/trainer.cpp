#include "opgan/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "opgan/error.hpp"
#include "opgan/rng.hpp"
#include "opgan/serialize.hpp"

namespace opgan::training {

using ad::Var;
using signal::kNetworkLength;
using signal::kSegmentSamples;

// ---------------------------------------------------------------------------
// config

void TrainConfig::validate() const {
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (!(lr_generator > 0.0) || !(lr_discriminator > 0.0)) {
    throw ConfigError("learning rates must be > 0");
  }
  if (!(lambda_adv >= 0.0) || !(lambda_time >= 0.0) || !(lambda_stft >= 0.0)) {
    throw ConfigError("loss weights must be >= 0");
  }
  if (stft_window < 2 || stft_window > kSegmentSamples) {
    throw ConfigError("stft window must lie in [2, " + std::to_string(kSegmentSamples) + "]");
  }
  if (stft_hop < 1) throw ConfigError("stft hop must be >= 1");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"max_iters", c.max_iters},
          {"batch", c.batch},
          {"lr_generator", c.lr_generator},
          {"lr_discriminator", c.lr_discriminator},
          {"lambda_adv", c.lambda_adv},
          {"lambda_time", c.lambda_time},
          {"lambda_stft", c.lambda_stft},
          {"seed", c.seed},
          {"arch", models::to_json(c.arch)},
          {"stft_window", c.stft_window},
          {"stft_hop", c.stft_hop},
          {"checkpoint_interval", c.checkpoint_interval},
          {"checkpoint_path", c.checkpoint_path},
          {"loss_csv_path", c.loss_csv_path},
          {"strict_determinism", c.strict_determinism}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  TrainConfig c;
  try {
    for (const auto& [key, val] : j.items()) {
      if (key == "max_iters") c.max_iters = val.get<std::size_t>();
      else if (key == "batch") c.batch = val.get<std::size_t>();
      else if (key == "lr_generator") c.lr_generator = val.get<double>();
      else if (key == "lr_discriminator") c.lr_discriminator = val.get<double>();
      else if (key == "lambda_adv") c.lambda_adv = val.get<double>();
      else if (key == "lambda_time") c.lambda_time = val.get<double>();
      else if (key == "lambda_stft") c.lambda_stft = val.get<double>();
      else if (key == "seed") c.seed = val.get<std::uint64_t>();
      else if (key == "arch") c.arch = models::architecture_from_json(val);
      else if (key == "stft_window") c.stft_window = val.get<std::size_t>();
      else if (key == "stft_hop") c.stft_hop = val.get<std::size_t>();
      else if (key == "checkpoint_interval") c.checkpoint_interval = val.get<std::size_t>();
      else if (key == "checkpoint_path") c.checkpoint_path = val.get<std::string>();
      else if (key == "loss_csv_path") c.loss_csv_path = val.get<std::string>();
      else if (key == "strict_determinism") c.strict_determinism = val.get<bool>();
      else throw ConfigError("unknown training config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad training config value: ") + e.what());
  }
  c.validate();
  return c;
}

std::string loss_csv_row(const IterationLoss& l) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", l.iter, l.adv_g,
                l.adv_d, l.time, l.stft, l.total, l.wallclock_ms);
  return buf;
}

std::vector<double> pad_to_network(std::span<const double> segment) {
  if (segment.size() > kNetworkLength) throw ConfigError("segment longer than the network input");
  std::vector<double> out(kNetworkLength, 0.0);
  const std::size_t left = (kNetworkLength - segment.size()) / 2;
  std::copy(segment.begin(), segment.end(), out.begin() + static_cast<long>(left));
  return out;
}

std::vector<double> crop_from_network(std::span<const double> output) {
  if (output.size() < kSegmentSamples) throw ConfigError("network output shorter than a segment");
  const std::size_t left = (output.size() - kSegmentSamples) / 2;
  return {output.begin() + static_cast<long>(left),
          output.begin() + static_cast<long>(left + kSegmentSamples)};
}

// ---------------------------------------------------------------------------
// Trainer

namespace {

models::ArchitectureConfig seeded(models::ArchitectureConfig arch, std::uint64_t seed) {
  arch.seed = seed;
  return arch;
}

constexpr std::uint64_t kShuffleStream = 0x5348'5546'0000'0000ULL;

}  // namespace

Trainer::Trainer(TrainConfig cfg, std::vector<signal::SegmentPair> pairs)
    : cfg_(std::move(cfg)),
      pairs_(std::move(pairs)),
      gen_(seeded(cfg_.arch, cfg_.seed)),
      disc_(seeded(cfg_.arch, cfg_.seed)) {
  cfg_.validate();
  cfg_.arch.seed = cfg_.seed;
  if (pairs_.empty()) throw ConfigError("training needs at least one segment pair");
  for (const auto& p : pairs_) {
    if (p.source.size() != kSegmentSamples || p.target.size() != kSegmentSamples) {
      throw ConfigError("segment pair '" + p.record_id + "' is not " +
                        std::to_string(kSegmentSamples) + " samples long");
    }
  }
}

std::vector<std::size_t> Trainer::batch_indices(std::size_t iter) const {
  const std::size_t n = pairs_.size();
  std::vector<std::size_t> out;
  std::size_t cached_epoch = SIZE_MAX;
  std::vector<std::size_t> perm(n);
  for (std::size_t b = 0; b < cfg_.batch; ++b) {
    const std::size_t pos = iter * cfg_.batch + b;
    const std::size_t epoch = pos / n;
    if (epoch != cached_epoch) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      Rng rng(derive_seed(cfg_.seed, kShuffleStream + epoch));
      shuffle(perm.begin(), perm.end(), rng);
      cached_epoch = epoch;
    }
    out.push_back(perm[pos % n]);
  }
  return out;
}

ad::Var Trainer::padded_batch(std::span<const std::size_t> idx, bool source) const {
  Tensor3 t({idx.size(), 1, kNetworkLength}, 0.0);
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto& p = pairs_.at(idx[b]);
    const auto padded = pad_to_network(source ? p.source : p.target);
    std::copy(padded.begin(), padded.end(), t.row(b, 0).begin());
  }
  return Var::constant(std::move(t));
}

ad::Var Trainer::source_batch(std::span<const std::size_t> idx) const {
  return padded_batch(idx, true);
}
ad::Var Trainer::target_batch(std::span<const std::size_t> idx) const {
  return padded_batch(idx, false);
}

ad::Var Trainer::generate(const Var& source) const {
  return ad::crop_pad(gen_.forward(source), kSegmentSamples);
}

ad::Var Trainer::discriminate(const Var& signal_1000, const Var& source) const {
  const Var padded = ad::crop_pad(signal_1000, kNetworkLength);
  return cfg_.arch.conditional_discriminator ? disc_.forward(padded, source)
                                             : disc_.forward(padded);
}

double Trainer::discriminator_step(const Var& source, const Var& target, const Var& fake) {
  disc_.set_requires_grad(true);
  disc_.zero_grad();
  const Var real_scores = discriminate(ad::crop_pad(target, kSegmentSamples), source);
  const Var fake_scores = discriminate(fake.detach(), source);
  const Var loss = discriminator_loss(real_scores, fake_scores);
  const double value = loss.item();
  if (!std::isfinite(value)) return value;
  loss.backward();
  auto params = disc_.parameters();
  adam_step(params, adam_d_, cfg_.lr_discriminator);
  return value;
}

GeneratorLosses Trainer::generator_step(const Var& source, const Var& target, const Var& fake) {
  disc_.set_requires_grad(false);
  gen_.zero_grad();
  const Var gt = ad::crop_pad(target, kSegmentSamples);
  const Var adv = generator_adv_loss(discriminate(fake, source));
  const Var tl = time_loss(gt, fake);
  const Var sl = stft_loss(gt, fake, cfg_.stft_window, cfg_.stft_hop);
  const Var total = total_loss(adv, tl, sl, cfg_);
  GeneratorLosses out{adv.item(), tl.item(), sl.item(), total.item()};
  disc_.set_requires_grad(true);
  if (!std::isfinite(out.total)) return out;
  total.backward();
  auto params = gen_.parameters();
  adam_step(params, adam_g_, cfg_.lr_generator);
  return out;
}

IterationLoss Trainer::step() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto idx = batch_indices(iter_);
  const Var source = source_batch(idx);
  const Var target = target_batch(idx);
  const Var fake = generate(source);

  IterationLoss l;
  l.iter = iter_ + 1;
  l.adv_d = discriminator_step(source, target, fake);
  const GeneratorLosses g = std::isfinite(l.adv_d) ? generator_step(source, target, fake)
                                                   : GeneratorLosses{NAN, NAN, NAN, NAN};
  l.adv_g = g.adv;
  l.time = g.time;
  l.stft = g.stft;
  l.total = g.total;
  if (!std::isfinite(l.adv_d) || !std::isfinite(l.total)) {
    std::string records;
    for (auto i : idx) records += (records.empty() ? "" : " ") + pairs_[i].record_id + "#" +
                                  std::to_string(pairs_[i].segment_index);
    throw TrainingDiverged("non-finite loss at iteration " + std::to_string(l.iter) +
                           " (pairs: " + records + "): " + loss_csv_row(l));
  }
  if (!cfg_.strict_determinism) {
    l.wallclock_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  }
  ++iter_;
  report_.iterations.push_back(l);
  report_.wallclock_ms += l.wallclock_ms;
  return l;
}

const TrainReport& Trainer::run() {
  std::ofstream csv;
  if (!cfg_.loss_csv_path.empty()) {
    const bool fresh = !std::filesystem::exists(cfg_.loss_csv_path) ||
                       std::filesystem::file_size(cfg_.loss_csv_path) == 0;
    csv.open(cfg_.loss_csv_path, std::ios::app);
    if (!csv) throw IoError("cannot open loss log '" + cfg_.loss_csv_path + "'");
    if (fresh) csv << kLossCsvHeader << '\n';
  }
  while (iter_ < cfg_.max_iters) {
    const IterationLoss l = step();
    if (csv.is_open()) csv << loss_csv_row(l) << '\n' << std::flush;
    if (cfg_.checkpoint_interval > 0 && !cfg_.checkpoint_path.empty() &&
        iter_ % cfg_.checkpoint_interval == 0) {
      save_checkpoint(cfg_.checkpoint_path);
      report_.checkpoint_path = cfg_.checkpoint_path;
    }
  }
  return report_;
}

// ---------------------------------------------------------------------------
// checkpoints

namespace {

void append_adam(const AdamState& st, const std::string& prefix,
                 std::vector<models::NamedBlob>& blobs) {
  for (std::size_t i = 0; i < st.m.size(); ++i) {
    const auto m = st.m[i].values();
    const auto v = st.v[i].values();
    blobs.push_back({prefix + std::to_string(i) + ".m", {m.begin(), m.end()}});
    blobs.push_back({prefix + std::to_string(i) + ".v", {v.begin(), v.end()}});
  }
}

nlohmann::json adam_json(const AdamState& st) {
  return {{"step", st.step},
          {"beta1", st.beta1},
          {"beta2", st.beta2},
          {"eps", st.eps},
          {"tensors", st.m.size()}};
}

AdamState restore_adam(const nlohmann::json& j, const models::LayerStack& model,
                       const std::string& prefix, const models::Container& c) {
  AdamState st;
  st.step = j.at("step").get<std::uint64_t>();
  st.beta1 = j.at("beta1").get<double>();
  st.beta2 = j.at("beta2").get<double>();
  st.eps = j.at("eps").get<double>();
  const auto n = j.at("tensors").get<std::size_t>();
  const auto params = model.parameters();
  if (n != 0 && n != params.size()) {
    throw DecodeError("optimizer state has " + std::to_string(n) + " tensors, model has " +
                          std::to_string(params.size()),
                      0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& m = c.blob(prefix + std::to_string(i) + ".m");
    const auto& v = c.blob(prefix + std::to_string(i) + ".v");
    const Shape s = params[i].shape();
    if (m.size() != s.numel() || v.size() != s.numel()) {
      throw DecodeError("optimizer moment '" + prefix + std::to_string(i) + "' has wrong size", 0);
    }
    st.m.emplace_back(s, m);
    st.v.emplace_back(s, v);
  }
  return st;
}

}  // namespace

void Trainer::save_checkpoint(const std::string& path) const {
  nlohmann::json manifest{{"kind", "checkpoint"},
                          {"iteration", iter_},
                          {"config", to_json(cfg_)},
                          {"generator", models::model_section(gen_, "generator")},
                          {"discriminator", models::model_section(disc_, "discriminator")},
                          {"adam_generator", adam_json(adam_g_)},
                          {"adam_discriminator", adam_json(adam_d_)}};
  std::vector<models::NamedBlob> blobs;
  models::append_layer_blobs(gen_, "g.", blobs);
  models::append_layer_blobs(disc_, "d.", blobs);
  append_adam(adam_g_, "adam.g.", blobs);
  append_adam(adam_d_, "adam.d.", blobs);
  models::write_file_atomic(path, models::encode_container(std::move(manifest), blobs));
}

Trainer Trainer::resume(const std::string& path, std::vector<signal::SegmentPair> pairs) {
  const auto bytes = models::read_file_bytes(path);
  const models::Container c = models::decode_container(bytes);
  try {
    const auto& m = c.manifest;
    if (m.at("kind").get<std::string>() != "checkpoint") {
      throw DecodeError("'" + path + "' is not a training checkpoint", 16);
    }
    Trainer t(train_config_from_json(m.at("config")), std::move(pairs));
    if (!(models::architecture_from_json(m.at("generator").at("arch")) == t.cfg_.arch)) {
      throw DecodeError("checkpoint generator architecture disagrees with its config", 16);
    }
    models::restore_layer_blobs(t.gen_, "g.", c);
    models::restore_layer_blobs(t.disc_, "d.", c);
    t.adam_g_ = restore_adam(m.at("adam_generator"), t.gen_, "adam.g.", c);
    t.adam_d_ = restore_adam(m.at("adam_discriminator"), t.disc_, "adam.d.", c);
    t.iter_ = m.at("iteration").get<std::size_t>();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError(std::string("malformed checkpoint manifest: ") + e.what(), 16);
  } catch (const ConfigError& e) {
    throw DecodeError(std::string("invalid checkpoint: ") + e.what(), 16);
  }
}

TrainResult train(const TrainConfig& cfg, const std::vector<signal::SegmentPair>& pairs) {
  Trainer t(cfg, pairs);
  TrainReport report = t.run();
  return {t.generator(), std::move(report)};
}

}  // namespace opgan::training
