#include "opgan/models.hpp"

#include <cmath>

#include "opgan/error.hpp"
#include "opgan/rng.hpp"

namespace opgan::models {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kTanh: return "tanh";
    case Activation::kLeaky: return "leaky";
    case Activation::kNone: return "none";
  }
  return "none";
}

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "leaky") return Activation::kLeaky;
  if (s == "none") return Activation::kNone;
  throw ConfigError("unknown activation '" + s + "'");
}

// ---------------------------------------------------------------------------
// OperationalLayer

namespace {

void validate(const OperationalLayerSpec& s) {
  if (s.in_channels < 1 || s.out_channels < 1 || s.kernel < 1 || s.order < 1 || s.stride < 1) {
    throw ConfigError("operational layer spec fields must be positive");
  }
}

}  // namespace

OperationalLayer::OperationalLayer(const OperationalLayerSpec& spec) : spec_(spec) {
  validate(spec_);
  weights_ = ad::Var::leaf(
      Tensor3({spec_.out_channels, spec_.in_channels, spec_.kernel * spec_.order}, 0.0), true);
  bias_ = ad::Var::leaf(Tensor3({1, spec_.out_channels, 1}, 0.0), true);
}

OperationalLayer::OperationalLayer(const OperationalLayer& other)
    : spec_(other.spec_),
      weights_(ad::Var::leaf(other.weights_.value(), other.weights_.requires_grad())),
      bias_(ad::Var::leaf(other.bias_.value(), other.bias_.requires_grad())) {}

OperationalLayer& OperationalLayer::operator=(const OperationalLayer& other) {
  if (this != &other) *this = OperationalLayer(other);
  return *this;
}

ad::Var OperationalLayer::preactivation(const ad::Var& y_prev) const {
  if (y_prev.shape().channels != spec_.in_channels) {
    throw ConfigError("operational layer expects " + std::to_string(spec_.in_channels) +
                      " channels, got " + std::to_string(y_prev.shape().channels));
  }
  return ad::operational_conv1d(y_prev, weights_, bias_, spec_.kernel, spec_.order, spec_.stride,
                                spec_.pad);
}

ad::Var OperationalLayer::forward(const ad::Var& y_prev) const {
  ad::Var x = preactivation(y_prev);
  switch (spec_.activation) {
    case Activation::kTanh: return ad::tanh(x);
    case Activation::kLeaky: return ad::leaky_relu(x, spec_.leaky_slope);
    case Activation::kNone: return x;
  }
  return x;
}

std::size_t OperationalLayer::output_length(std::size_t input_length) const {
  return ad::conv_output_length(input_length, spec_.kernel, spec_.stride, spec_.pad);
}

std::size_t OperationalLayer::parameter_count() const noexcept { return count_parameters(spec_); }

double OperationalLayer::weight(std::size_t o, std::size_t i, std::size_t k, std::size_t q) const {
  return weights_.value()
      .values()[((o * spec_.in_channels + i) * spec_.kernel + k) * spec_.order + q];
}

double& OperationalLayer::weight(std::size_t o, std::size_t i, std::size_t k, std::size_t q) {
  return weights_.mutable_value()
      .values()[((o * spec_.in_channels + i) * spec_.kernel + k) * spec_.order + q];
}

double init_bound(const OperationalLayerSpec& spec) {
  return std::sqrt(6.0 / static_cast<double>((spec.in_channels + spec.out_channels) *
                                             spec.kernel * spec.order));
}

OperationalLayer init_layer(const OperationalLayerSpec& spec, std::uint64_t seed) {
  OperationalLayer layer(spec);
  Rng rng(seed);
  const double bound = init_bound(spec);
  for (double& w : layer.weights().mutable_value().values()) w = uniform(rng, -bound, bound);
  return layer;
}

std::size_t count_parameters(const OperationalLayerSpec& s) {
  return s.out_channels * s.in_channels * s.kernel * s.order + s.out_channels;
}

// ---------------------------------------------------------------------------
// LayerStack

std::vector<ad::Var> LayerStack::parameters() const {
  std::vector<ad::Var> out;
  out.reserve(2 * layers_.size());
  for (const auto& l : layers_) {
    out.push_back(l.weights());
    out.push_back(l.bias());
  }
  return out;
}

std::size_t LayerStack::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.parameter_count();
  return n;
}

void LayerStack::set_requires_grad(bool on) {
  for (auto& l : layers_) {
    l.weights().set_requires_grad(on);
    l.bias().set_requires_grad(on);
  }
}

void LayerStack::zero_grad() {
  for (auto& l : layers_) {
    l.weights().zero_grad();
    l.bias().zero_grad();
  }
}

std::size_t count_parameters(const LayerStack& model) { return model.parameter_count(); }

ArchitectureConfig reduced_architecture() {
  ArchitectureConfig a;
  a.generator_widths = {8, 16, 32, 32, 64};
  a.discriminator_widths = {8, 16, 16, 32, 32};
  return a;
}

namespace {

void check_widths(const std::vector<std::size_t>& w, std::size_t n, const char* what) {
  if (w.size() != n) {
    throw ConfigError(std::string(what) + " needs exactly " + std::to_string(n) +
                      " entries, got " + std::to_string(w.size()));
  }
  for (auto v : w) {
    if (v < 1) throw ConfigError(std::string(what) + " entries must be positive");
  }
}

OperationalLayer make_layer(const OperationalLayerSpec& spec, bool randomize,
                            std::uint64_t seed) {
  return randomize ? init_layer(spec, seed) : OperationalLayer(spec);
}

}  // namespace

// ---------------------------------------------------------------------------
// Generator

Generator::Generator(ArchitectureConfig arch, bool randomize) : LayerStack(std::move(arch)) {
  const auto& a = arch_;
  check_widths(a.generator_widths, kDepth, "generator_widths");
  check_widths(a.encoder_kernels, kDepth, "encoder_kernels");
  if (a.order < 1) throw ConfigError("order Q must be >= 1");
  if (a.decoder_kernel < 1) throw ConfigError("decoder_kernel must be >= 1");
  const auto& w = a.generator_widths;

  std::uint64_t idx = 0;
  for (std::size_t i = 0; i < kDepth; ++i) {
    OperationalLayerSpec s;
    s.in_channels = i == 0 ? 1 : w[i - 1];
    s.out_channels = w[i];
    s.kernel = a.encoder_kernels[i];
    s.order = a.order;
    s.stride = 2;
    s.pad = same_pad(s.kernel);
    s.activation = Activation::kTanh;
    layers_.push_back(make_layer(s, randomize, derive_seed(a.seed, idx++)));
  }
  for (std::size_t j = 0; j < kDepth; ++j) {
    OperationalLayerSpec s;
    s.in_channels = w[kDepth - 1 - j];
    s.out_channels = j + 1 < kDepth ? w[kDepth - 2 - j] : 1;
    s.kernel = a.decoder_kernel;
    s.order = a.order;
    s.stride = 1;
    s.pad = same_pad(s.kernel);
    s.activation = Activation::kTanh;
    layers_.push_back(make_layer(s, randomize, derive_seed(a.seed, idx++)));
  }
  // Skip additions need matching widths at every level.
  for (std::size_t j = 0; j + 1 < kDepth; ++j) {
    const auto& dec = layers_[kDepth + j].spec();
    const auto& enc = layers_[kDepth - 2 - j].spec();
    if (dec.out_channels != enc.out_channels) {
      throw ConfigError("decoder stage " + std::to_string(j) + " width " +
                        std::to_string(dec.out_channels) +
                        " does not match encoder skip width " + std::to_string(enc.out_channels));
    }
  }
}

ad::Var Generator::forward(const ad::Var& x) const {
  const Shape s = x.shape();
  if (s.channels != 1) throw ConfigError("generator input must have 1 channel");
  if (s.length == 0 || s.length % kLengthMultiple != 0) {
    throw ConfigError("generator input length " + std::to_string(s.length) +
                      " is not a multiple of " + std::to_string(kLengthMultiple));
  }
  std::vector<ad::Var> skips;
  ad::Var h = x;
  for (std::size_t i = 0; i < kDepth; ++i) {
    h = layers_[i].forward(h);
    skips.push_back(h);
  }
  for (std::size_t j = 0; j < kDepth; ++j) {
    ad::Var pre = layers_[kDepth + j].preactivation(ad::upsample2(h, arch_.upsample));
    if (j + 1 < kDepth) pre = ad::add(pre, skips[kDepth - 2 - j]);
    h = ad::tanh(pre);
  }
  return h;
}

std::vector<Tensor3> Generator::activations(const ad::Var& x) const {
  std::vector<Tensor3> acts;
  std::vector<ad::Var> skips;
  ad::Var h = x;
  for (std::size_t i = 0; i < kDepth; ++i) {
    h = layers_[i].forward(h);
    skips.push_back(h);
    acts.push_back(h.value());
  }
  for (std::size_t j = 0; j < kDepth; ++j) {
    ad::Var pre = layers_[kDepth + j].preactivation(ad::upsample2(h, arch_.upsample));
    if (j + 1 < kDepth) pre = ad::add(pre, skips[kDepth - 2 - j]);
    h = ad::tanh(pre);
    acts.push_back(h.value());
  }
  return acts;
}

// ---------------------------------------------------------------------------
// Discriminator

Discriminator::Discriminator(ArchitectureConfig arch, bool randomize)
    : LayerStack(std::move(arch)) {
  const auto& a = arch_;
  check_widths(a.discriminator_widths, 5, "discriminator_widths");
  check_widths(a.discriminator_strides, 6, "discriminator_strides");
  if (a.discriminator_kernel < 1) throw ConfigError("discriminator_kernel must be >= 1");
  if (a.order < 1) throw ConfigError("order Q must be >= 1");
  std::size_t in = input_channels();
  for (std::size_t i = 0; i < 6; ++i) {
    OperationalLayerSpec s;
    s.in_channels = in;
    s.out_channels = i < 5 ? a.discriminator_widths[i] : 1;
    s.kernel = a.discriminator_kernel;
    s.order = a.order;
    s.stride = a.discriminator_strides[i];
    s.pad = same_pad(s.kernel);
    s.activation = i < 5 ? Activation::kTanh : Activation::kNone;
    layers_.push_back(make_layer(s, randomize, derive_seed(a.seed, 100 + i)));
    in = s.out_channels;
  }
}

ad::Var Discriminator::forward(const ad::Var& signal) const {
  if (arch_.conditional_discriminator) {
    throw UsageError("conditional discriminator needs the source signal as a condition");
  }
  ad::Var h = signal;
  for (const auto& l : layers_) h = l.forward(h);
  return h;
}

ad::Var Discriminator::forward(const ad::Var& signal, const ad::Var& condition) const {
  if (!arch_.conditional_discriminator) return forward(signal);
  ad::Var h = ad::concat_channels(signal, condition);
  for (const auto& l : layers_) h = l.forward(h);
  return h;
}

std::size_t Discriminator::score_length(std::size_t input_length) const {
  std::size_t len = input_length;
  for (const auto& l : layers_) len = l.output_length(len);
  return len;
}

Generator build_generator(const ArchitectureConfig& arch) { return Generator(arch); }
Discriminator build_discriminator(const ArchitectureConfig& arch) { return Discriminator(arch); }

}  // namespace opgan::models
