#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "opgan/error.hpp"
#include "opgan/gradcheck.hpp"
#include "opgan/models.hpp"
#include "opgan/serialize.hpp"
#include "test_util.hpp"

using namespace opgan;
using namespace opgan::models;
using opgan::testing::max_abs_diff;
using opgan::testing::random_tensor;

namespace {

OperationalLayerSpec spec(std::size_t cin, std::size_t cout, std::size_t K, std::size_t Q,
                          std::size_t stride = 1, Activation act = Activation::kNone) {
  OperationalLayerSpec s;
  s.in_channels = cin;
  s.out_channels = cout;
  s.kernel = K;
  s.order = Q;
  s.stride = stride;
  s.pad = same_pad(K);
  s.activation = act;
  return s;
}

ArchitectureConfig tiny_arch(std::size_t q = 3) {
  ArchitectureConfig a;
  a.order = q;
  a.generator_widths = {2, 2, 3, 3, 2};
  a.discriminator_widths = {2, 2, 2, 2, 2};
  a.discriminator_strides = {2, 2, 2, 1, 1, 1};
  return a;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("opgan_test_" + name)).string();
}

}  // namespace

TEST_CASE("operational_forward hand cases") {
  SUBCASE("Q=2 single weight pair") {
    OperationalLayer layer(spec(1, 1, 1, 2));
    layer.weight(0, 0, 0, 0) = 1.0;
    layer.weight(0, 0, 0, 1) = 1.0;
    auto y = layer.forward(ad::Var::constant(Tensor3::signal({0.5})));
    CHECK(y.value().values()[0] == 0.75);
  }
  SUBCASE("zero input yields the bias") {
    std::mt19937_64 rng(1);
    OperationalLayer layer = init_layer(spec(2, 3, 5, 3), 4);
    layer.bias().mutable_value() = Tensor3({1, 3, 1}, std::vector<double>{0.5, -1.0, 2.0});
    auto y = layer.forward(ad::Var::constant(Tensor3({1, 2, 10}, 0.0))).value();
    for (std::size_t l = 0; l < 10; ++l) {
      CHECK(y(0, 0, l) == 0.5);
      CHECK(y(0, 1, l) == -1.0);
      CHECK(y(0, 2, l) == 2.0);
    }
  }
  SUBCASE("channel mismatch") {
    OperationalLayer layer(spec(2, 1, 3, 3));
    CHECK_THROWS_AS(layer.forward(ad::Var::constant(Tensor3({1, 3, 8}))), ConfigError);
  }
  SUBCASE("output length follows the conv rule") {
    OperationalLayer layer(spec(1, 1, 4, 2, 4));
    CHECK(layer.output_length(1024) == 256);
    CHECK(layer.forward(ad::Var::constant(Tensor3({1, 1, 1024}))).shape().length == 256);
  }
}

TEST_CASE("Q=1 reduces to conv1d in forward and backward") {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t cin = 1 + rng() % 4, cout = 1 + rng() % 4, K = 1 + rng() % 5,
                      stride = 1 + rng() % 2, L = K + rng() % 28;
    OperationalLayer layer = init_layer(spec(cin, cout, K, 1, stride), rng());
    layer.bias().mutable_value() = random_tensor(rng, {1, cout, 1});
    ad::Var kernel = ad::Var::leaf(layer.weights().value(), true);
    ad::Var bias = ad::Var::leaf(layer.bias().value(), true);
    ad::Var x1 = ad::Var::leaf(random_tensor(rng, {2, cin, L}), true);
    ad::Var x2 = ad::Var::leaf(x1.value(), true);
    ad::Var a = layer.forward(x1);
    ad::Var b = ad::conv1d(x2, kernel, bias, stride, layer.spec().pad);
    CHECK(max_abs_diff(a.value(), b.value()) <= 1e-12);
    ad::Var t = ad::Var::constant(random_tensor(rng, a.shape()));
    ad::l1_loss(a, t).backward();
    ad::l1_loss(b, t).backward();
    CHECK(max_abs_diff(layer.weights().grad(), kernel.grad()) <= 1e-12);
    CHECK(max_abs_diff(layer.bias().grad(), bias.grad()) <= 1e-12);
    CHECK(max_abs_diff(x1.grad(), x2.grad()) <= 1e-12);
  }
}

TEST_CASE("init_layer") {
  const auto s = spec(16, 16, 5, 3);
  SUBCASE("deterministic") {
    CHECK(testing::to_vec(init_layer(s, 7).weights().value()) ==
          testing::to_vec(init_layer(s, 7).weights().value()));
    CHECK(testing::to_vec(init_layer(s, 7).weights().value()) !=
          testing::to_vec(init_layer(s, 8).weights().value()));
  }
  SUBCASE("bound respected, bias zero") {
    const auto layer = init_layer(s, 3);
    const double bound = std::sqrt(6.0 / (32.0 * 5 * 3));
    CHECK(init_bound(s) == doctest::Approx(bound));
    for (double w : layer.weights().value().values()) CHECK(std::abs(w) <= bound);
    for (double b : layer.bias().value().values()) CHECK(b == 0.0);
  }
  SUBCASE("output variance on unit-variance bounded input") {
    // Inputs are +-1 with equal probability: variance 1, inside the tanh range.
    std::mt19937_64 rng(12);
    double sum = 0.0, sum_sq = 0.0;
    std::size_t n = 0;
    for (int draw = 0; draw < 1000; ++draw) {
      const auto layer = init_layer(s, 1000 + draw);
      Tensor3 x({1, 16, 32});
      for (double& v : x.values()) v = (rng() & 1) ? 1.0 : -1.0;
      auto y = layer.forward(ad::Var::constant(x)).value();
      for (std::size_t o = 0; o < 16; ++o) {
        const double v = y(0, o, 16);  // interior sample, no padding involved
        sum += v;
        sum_sq += v * v;
        ++n;
      }
    }
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    MESSAGE("initialized layer output variance: " << var);
    CHECK(var >= 0.1);
    CHECK(var <= 10.0);
  }
}

TEST_CASE("generator and discriminator wiring") {
  const ArchitectureConfig arch;  // defaults
  Generator g = build_generator(arch);
  Discriminator d = build_discriminator(arch);
  std::mt19937_64 rng(2);
  ad::Var x = ad::Var::constant(random_tensor(rng, {1, 1, 1024}));

  SUBCASE("shapes") {
    auto y = g.forward(x);
    CHECK(y.shape() == Shape{1, 1, 1024});
    CHECK(d.forward(y).shape() == Shape{1, 1, 2});
    CHECK(d.score_length(1024) == 2);
  }
  SUBCASE("encoder kernels and strides") {
    const std::vector<std::size_t> enc{5, 4, 5, 5, 2};
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(g.layers()[i].spec().kernel == enc[i]);
      CHECK(g.layers()[i].spec().stride == 2);
      CHECK(g.layers()[5 + i].spec().kernel == 5);
      CHECK(g.layers()[5 + i].spec().stride == 1);
    }
    const std::vector<std::size_t> strides{4, 4, 4, 2, 2, 2};
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(d.layers()[i].spec().kernel == 4);
      CHECK(d.layers()[i].spec().stride == strides[i]);
    }
    CHECK(d.layers().back().spec().out_channels == 1);
    CHECK(d.layers().back().spec().activation == Activation::kNone);
  }
  SUBCASE("output and hidden activations bounded in (-1, 1)") {
    for (const auto& a : g.activations(ad::Var::constant(random_tensor(rng, {1, 1, 1024}, -3, 3)))) {
      for (double v : a.values()) {
        CHECK(v > -1.0);
        CHECK(v < 1.0);
      }
    }
  }
  SUBCASE("length contract for multiples of 32") {
    for (std::size_t len : {32u, 64u, 96u, 320u, 2048u}) {
      CHECK(g.forward(ad::Var::constant(Tensor3({1, 1, len}, 0.1))).shape().length == len);
    }
    CHECK_THROWS_AS(g.forward(ad::Var::constant(Tensor3({1, 1, 1000}))), ConfigError);
  }
  SUBCASE("conditional discriminator stacks the source") {
    ArchitectureConfig c = arch;
    c.conditional_discriminator = true;
    Discriminator dc = build_discriminator(c);
    CHECK(dc.layers()[0].spec().in_channels == 2);
    CHECK(dc.forward(x, x).shape() == Shape{1, 1, 2});
    CHECK_THROWS_AS(dc.forward(x), UsageError);
  }
  SUBCASE("bad width lists") {
    ArchitectureConfig bad = arch;
    bad.generator_widths = {8, 16, 32, 64};
    CHECK_THROWS_AS(build_generator(bad), ConfigError);
    bad = arch;
    bad.generator_widths = {8, 16, 0, 64, 64};
    CHECK_THROWS_AS(build_generator(bad), ConfigError);
  }
  SUBCASE("copies own their parameters") {
    Generator copy = g;
    copy.layers()[0].weight(0, 0, 0, 0) += 1.0;
    CHECK(copy.layers()[0].weight(0, 0, 0, 0) != g.layers()[0].weight(0, 0, 0, 0));
  }
}

TEST_CASE("count_parameters") {
  CHECK(count_parameters(spec(1, 8, 5, 3)) == 128);
  CHECK(count_parameters(spec(4, 6, 3, 1)) == 6 * 4 * 3 + 6);
  OperationalLayer l(spec(3, 5, 4, 2));
  CHECK(l.parameter_count() == l.weights().value().numel() + l.bias().value().numel());

  const Generator g = build_generator(ArchitectureConfig{});
  const auto n = count_parameters(g);
  MESSAGE("default generator parameters: " << n);
  CHECK(n >= 0.85 * 377000);
  CHECK(n <= 1.15 * 377000);
  CHECK(count_parameters(build_generator(reduced_architecture())) <= 100000);
}

TEST_CASE("full-model gradient checks on reduced-depth variants") {
  std::mt19937_64 rng(17);
  ad::GradCheckOptions opts;
  SUBCASE("generator") {
    Generator g(tiny_arch());
    auto ps = g.parameters();
    auto rep = ad::grad_check([&](const ad::Var& in) { return g.forward(in); },
                              ad::Var::constant(random_tensor(rng, {1, 1, 64})), ps, opts);
    INFO(rep.worst);
    CHECK(rep.pass);
  }
  SUBCASE("discriminator") {
    Discriminator d(tiny_arch());
    auto ps = d.parameters();
    auto rep = ad::grad_check([&](const ad::Var& in) { return d.forward(in); },
                              ad::Var::constant(random_tensor(rng, {1, 1, 64})), ps, opts);
    INFO(rep.worst);
    CHECK(rep.pass);
  }
}

TEST_CASE("model serialization") {
  ArchitectureConfig arch = reduced_architecture();
  arch.seed = 42;
  Generator g = build_generator(arch);
  const std::string path = temp_path("model.opgn");
  std::mt19937_64 rng(5);
  ad::Var x = ad::Var::constant(random_tensor(rng, {1, 1, 1024}));

  SUBCASE("round trip is bit-identical") {
    const ModelManifest m = save_model(g, path);
    Generator back = load_generator(path);
    CHECK(testing::to_vec(back.forward(x).value()) == testing::to_vec(g.forward(x).value()));
    CHECK(m.parameter_count == count_parameters(g));
    CHECK(count_parameters(back) == count_parameters(g));
    CHECK(m.arch == arch);
    CHECK(m.layers.size() == 10);
    CHECK(m.blobs.size() == 20);
    CHECK(m.format_version == kFormatVersion);
    auto bytes = read_file_bytes(path);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "OPGN");
  }
  SUBCASE("truncated file is a decode error") {
    auto bytes = encode_model(g);
    for (std::size_t cut : {std::size_t{3}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
      std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + cut);
      CHECK_THROWS_AS(decode_generator(part), DecodeError);
    }
  }
  SUBCASE("version mismatch is rejected") {
    auto bytes = encode_model(g);
    bytes[4] = 9;
    try {
      decode_generator(bytes);
      FAIL("expected DecodeError");
    } catch (const DecodeError& e) {
      CHECK(std::string(e.what()).find("version") != std::string::npos);
      CHECK(e.offset() == 4);
    }
  }
  SUBCASE("discriminator container is not a generator") {
    save_model(build_discriminator(arch), path);
    CHECK_THROWS_AS(load_generator(path), DecodeError);
    CHECK(load_discriminator(path).parameter_count() == build_discriminator(arch).parameter_count());
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_generator(path + ".missing"), IoError); }
  std::filesystem::remove(path);
}
