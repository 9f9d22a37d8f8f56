#include <algorithm>
#include <chrono>
#include <cstdio>

#include "opgan/error.hpp"
#include "opgan/eval.hpp"
#include "opgan/rng.hpp"

namespace opgan::eval {

LatencyReport bench_latency(const models::Generator& g, std::size_t n_segments) {
  if (n_segments < 10) throw ConfigError("bench_latency needs at least 10 segments");
  Rng rng(derive_seed(0, 7));
  Tensor3 x({1, 1, signal::kNetworkLength}, 0.0);
  for (double& v : x.values()) v = uniform(rng, -1.0, 1.0);
  const ad::Var in = ad::Var::constant(x);
  (void)g.forward(in);

  std::vector<double> ms;
  ms.reserve(n_segments);
  for (std::size_t i = 0; i < n_segments; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const ad::Var out = g.forward(in);
    const auto t1 = std::chrono::steady_clock::now();
    if (!out.value().all_finite()) throw ConfigError("generator produced non-finite output");
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(ms.begin(), ms.end());
  LatencyReport r;
  r.n_segments = n_segments;
  r.min_ms = ms.front();
  r.max_ms = ms.back();
  const std::size_t mid = ms.size() / 2;
  r.median_ms = ms.size() % 2 ? ms[mid] : 0.5 * (ms[mid - 1] + ms[mid]);
  return r;
}

GradcheckSweep gradcheck_sweep(std::span<const std::size_t> orders, std::size_t cases,
                               std::uint64_t seed, const ad::GradCheckOptions& opts) {
  if (orders.empty()) throw ConfigError("gradcheck sweep needs at least one order Q");
  constexpr std::size_t kKernels[] = {1, 3, 5};
  constexpr models::Activation kActs[] = {models::Activation::kTanh, models::Activation::kLeaky,
                                          models::Activation::kNone};
  GradcheckSweep sweep;
  for (std::size_t c = 0; c < cases; ++c) {
    Rng rng(derive_seed(seed, c));
    models::OperationalLayerSpec s;
    s.order = orders[rng() % orders.size()];
    s.kernel = kKernels[rng() % 3];
    s.stride = 1 + rng() % 2;
    s.pad = models::same_pad(s.kernel);
    s.in_channels = 1 + rng() % 3;
    s.out_channels = 1 + rng() % 3;
    s.activation = kActs[rng() % 3];
    const std::size_t length = 4 + rng() % 29;
    const std::size_t batch = 1 + rng() % 2;

    models::OperationalLayer layer = models::init_layer(s, rng());
    for (double& b : layer.bias().mutable_value().values()) b = uniform(rng, -0.5, 0.5);
    Tensor3 x({batch, s.in_channels, length}, 0.0);
    for (double& v : x.values()) v = uniform(rng, -1.0, 1.0);

    std::vector<ad::Var> params{layer.weights(), layer.bias()};
    const auto report =
        ad::grad_check([&](const ad::Var& in) { return layer.forward(in); },
                   ad::Var::leaf(std::move(x), true), params, opts);
    ++sweep.cases;
    if (!report.pass) ++sweep.failures;
    if (report.max_rel_err >= sweep.max_rel_err) {
      sweep.max_rel_err = report.max_rel_err;
      char buf[160];
      std::snprintf(buf, sizeof buf, "case %zu (Q=%zu K=%zu stride=%zu Cin=%zu Cout=%zu L=%zu %s): ",
                    c, s.order, s.kernel, s.stride, s.in_channels, s.out_channels, length,
                    models::to_string(s.activation).c_str());
      sweep.worst = buf + report.worst;
    }
  }
  return sweep;
}

}  // namespace opgan::eval
