#include <cmath>

#include "opgan/error.hpp"
#include "opgan/trainer.hpp"

namespace opgan::training {

void adam_step(std::span<ad::Var> params, std::span<const Tensor3> grads, AdamState& st,
               double lr) {
  if (params.size() != grads.size()) throw ConfigError("adam_step: params/grads count mismatch");
  if (st.m.empty() && st.step == 0) {
    for (const auto& p : params) {
      st.m.emplace_back(p.shape(), 0.0);
      st.v.emplace_back(p.shape(), 0.0);
    }
  }
  if (st.m.size() != params.size()) throw ConfigError("adam_step: state/parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!(params[i].shape() == grads[i].shape()) || !(st.m[i].shape() == grads[i].shape())) {
      throw ConfigError("adam_step: shape mismatch at parameter " + std::to_string(i));
    }
  }

  ++st.step;
  const double t = static_cast<double>(st.step);
  const double c1 = 1.0 - std::pow(st.beta1, t);
  const double c2 = 1.0 - std::pow(st.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].mutable_value().values();
    auto m = st.m[i].values();
    auto v = st.v[i].values();
    const auto g = grads[i].values();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = st.beta1 * m[j] + (1.0 - st.beta1) * g[j];
      v[j] = st.beta2 * v[j] + (1.0 - st.beta2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      w[j] -= lr * mhat / (std::sqrt(vhat) + st.eps);
    }
  }
}

void adam_step(std::span<ad::Var> params, AdamState& st, double lr) {
  std::vector<Tensor3> grads;
  grads.reserve(params.size());
  for (const auto& p : params) grads.push_back(p.has_grad() ? p.grad() : Tensor3(p.shape(), 0.0));
  adam_step(params, grads, st, lr);
}

}  // namespace opgan::training
