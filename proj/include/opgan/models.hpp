#pragma once

// Generative-neuron (Self-ONN) layers and the operational generator /
// discriminator built from them.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "opgan/autodiff.hpp"

namespace opgan::models {

enum class Activation { kTanh, kLeaky, kNone };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// "Same"-style padding: with this pad the output length is ceil(L / stride)
/// for every kernel size, odd or even.
constexpr std::size_t same_pad(std::size_t kernel) { return (kernel - 1) / 2; }

struct OperationalLayerSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 5;
  std::size_t order = 3;  // Q
  std::size_t stride = 1;
  std::size_t pad = 2;
  Activation activation = Activation::kTanh;
  double leaky_slope = 0.2;

  bool operator==(const OperationalLayerSpec&) const = default;
};

/// One layer of generative neurons. Output channel o is
///   bias[o] + sum_i sum_q conv1d(w[o, i, :, q], y_i^q)
/// followed by the activation. Copies are deep: a copied layer owns fresh
/// parameter leaves.
class OperationalLayer {
 public:
  /// Zero weights and bias.
  explicit OperationalLayer(const OperationalLayerSpec& spec);

  OperationalLayer(const OperationalLayer& other);
  OperationalLayer& operator=(const OperationalLayer& other);
  OperationalLayer(OperationalLayer&&) noexcept = default;
  OperationalLayer& operator=(OperationalLayer&&) noexcept = default;

  ad::Var forward(const ad::Var& y_prev) const;
  /// forward() without the activation.
  ad::Var preactivation(const ad::Var& y_prev) const;

  const OperationalLayerSpec& spec() const noexcept { return spec_; }
  std::size_t output_length(std::size_t input_length) const;
  std::size_t parameter_count() const noexcept;

  /// Shape (Cout, Cin, K*Q), element [o][i][k][q].
  ad::Var& weights() noexcept { return weights_; }
  const ad::Var& weights() const noexcept { return weights_; }
  /// Shape (1, Cout, 1).
  ad::Var& bias() noexcept { return bias_; }
  const ad::Var& bias() const noexcept { return bias_; }

  double weight(std::size_t o, std::size_t i, std::size_t k, std::size_t q) const;
  double& weight(std::size_t o, std::size_t i, std::size_t k, std::size_t q);

 private:
  OperationalLayerSpec spec_;
  ad::Var weights_;
  ad::Var bias_;
};

/// Uniform weights in +-sqrt(6 / ((Cin + Cout) * K * Q)), zero bias.
OperationalLayer init_layer(const OperationalLayerSpec& spec, std::uint64_t seed);
double init_bound(const OperationalLayerSpec& spec);

/// Architecture hyperparameters shared by the generator and discriminator.
struct ArchitectureConfig {
  std::size_t order = 3;  // Q
  std::uint64_t seed = 1;
  std::vector<std::size_t> generator_widths{16, 32, 64, 64, 128};
  std::vector<std::size_t> encoder_kernels{5, 4, 5, 5, 2};
  std::size_t decoder_kernel = 5;
  ad::UpsampleMode upsample = ad::UpsampleMode::kNearest;
  std::vector<std::size_t> discriminator_widths{16, 32, 64, 64, 64};
  std::size_t discriminator_kernel = 4;
  std::vector<std::size_t> discriminator_strides{4, 4, 4, 2, 2, 2};
  /// Feed the source alongside the real/fake signal to the discriminator.
  bool conditional_discriminator = false;

  bool operator==(const ArchitectureConfig&) const = default;
};

/// Small widths for desk-scale experiments (well under 100K generator parameters).
ArchitectureConfig reduced_architecture();

/// Stack of operational layers with shared bookkeeping.
class LayerStack {
 public:
  const ArchitectureConfig& arch() const noexcept { return arch_; }
  std::vector<OperationalLayer>& layers() noexcept { return layers_; }
  const std::vector<OperationalLayer>& layers() const noexcept { return layers_; }
  std::vector<ad::Var> parameters() const;
  std::size_t parameter_count() const noexcept;
  void set_requires_grad(bool on);
  void zero_grad();

 protected:
  LayerStack() = default;
  explicit LayerStack(ArchitectureConfig arch) : arch_(std::move(arch)) {}
  ArchitectureConfig arch_;
  std::vector<OperationalLayer> layers_;
};

/// 10-layer operational U-Net: five stride-2 encoder layers, then five
/// (upsample x2, operational layer) decoder stages. The output of encoder
/// stage i (1-based, i < 5) is added to the pre-activation of the decoder
/// stage that restores its length, before that stage's tanh. Layers 0..4 are
/// the encoder, 5..9 the decoder.
class Generator : public LayerStack {
 public:
  static constexpr std::size_t kDepth = 5;
  static constexpr std::size_t kLengthMultiple = 32;  // 2^kDepth

  explicit Generator(ArchitectureConfig arch, bool randomize = true);

  /// x: [B, 1, L] with L a multiple of 32. Returns [B, 1, L] in (-1, 1).
  ad::Var forward(const ad::Var& x) const;
  /// All hidden activations of one forward pass, for inspection.
  std::vector<Tensor3> activations(const ad::Var& x) const;
};

/// Six operational layers, kernel 4, strides 4,4,4,2,2,2; hidden tanh, final
/// linear single-channel projection. [B, C, 1024] -> [B, 1, 2].
class Discriminator : public LayerStack {
 public:
  explicit Discriminator(ArchitectureConfig arch, bool randomize = true);

  std::size_t input_channels() const noexcept { return arch_.conditional_discriminator ? 2 : 1; }
  ad::Var forward(const ad::Var& signal) const;
  /// Conditional variant: the source is stacked as a second channel.
  ad::Var forward(const ad::Var& signal, const ad::Var& condition) const;
  std::size_t score_length(std::size_t input_length) const;
};

Generator build_generator(const ArchitectureConfig& arch);
Discriminator build_discriminator(const ArchitectureConfig& arch);

std::size_t count_parameters(const LayerStack& model);
/// Cout * Cin * K * Q + Cout.
std::size_t count_parameters(const OperationalLayerSpec& spec);

}  // namespace opgan::models
