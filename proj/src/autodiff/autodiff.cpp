#include "opgan/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "opgan/error.hpp"

namespace opgan::ad {

// ---------------------------------------------------------------------------
// Var

Var Var::leaf(Tensor3 value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return Var(std::move(n));
}

const Tensor3& Var::value() const {
  if (!node_) throw UsageError("access to an undefined Var");
  return node_->value;
}

Tensor3& Var::mutable_value() {
  if (!node_) throw UsageError("access to an undefined Var");
  if (!node_->inputs.empty()) throw UsageError("mutable_value() on a non-leaf Var");
  return node_->value;
}

void Var::set_requires_grad(bool on) {
  if (!node_) throw UsageError("access to an undefined Var");
  if (!node_->inputs.empty()) throw UsageError("set_requires_grad() on a non-leaf Var");
  node_->requires_grad = on;
}

const Tensor3& Var::grad() const {
  if (!has_grad()) throw UsageError(std::string("no gradient on Var produced by ") + op());
  return *node_->grad;
}

void Var::zero_grad() {
  if (!node_) return;
  node_->grad = Tensor3(node_->value.shape(), 0.0);
}

double Var::item() const {
  const auto& v = value();
  if (v.numel() != 1) throw UsageError("item() on a tensor of shape " + v.shape().str());
  return v.values()[0];
}

Var Var::detach() const { return leaf(value(), false); }

Var Var::make_result(Tensor3 value, std::vector<Var> inputs, BackwardFn fn, const char* op) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Var& v) { return v.requires_grad(); });
  if (any) {
    n->requires_grad = true;
    n->inputs.reserve(inputs.size());
    for (auto& v : inputs) n->inputs.push_back(v.node_);
    n->backward = std::move(fn);
  }
  return Var(std::move(n));
}

void Var::backward() const {
  if (!node_) throw UsageError("backward() on an undefined Var");
  if (node_->value.numel() != 1) {
    throw UsageError("backward() needs a scalar loss, got shape " + node_->value.shape().str());
  }
  if (!node_->requires_grad) return;

  // Post-order DFS: every node appears after all of its inputs.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      Node* child = n->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Each call gathers gradients in fresh buffers and folds leaf buffers into
  // the persistent leaf grads at the end, so repeated calls add identical terms.
  std::unordered_map<Node*, Tensor3> fresh;
  fresh.reserve(order.size());
  for (Node* n : order) fresh.emplace(n, Tensor3(n->value.shape(), 0.0));
  fresh.at(node_.get()).values()[0] = 1.0;

  std::vector<Tensor3*> slots;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->inputs.empty()) continue;
    slots.assign(n->inputs.size(), nullptr);
    for (std::size_t i = 0; i < n->inputs.size(); ++i) {
      Node* in = n->inputs[i].get();
      if (in->requires_grad) slots[i] = &fresh.at(in);
    }
    n->backward(fresh.at(n), slots);
    fresh.erase(n);
  }
  for (auto& [n, g] : fresh) {
    if (n->grad) n->grad->accumulate(g);
    else n->grad = std::move(g);
  }
}

// ---------------------------------------------------------------------------
// helpers

namespace {

void require_same_shape(const Tensor3& a, const Tensor3& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ConfigError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                      b.shape().str());
  }
}

/// Output positions l in [lo, hi) for which l*stride + k - pad lands inside [0, length).
std::pair<std::size_t, std::size_t> valid_outputs(std::size_t length, std::size_t out_length,
                                                  std::size_t k, std::size_t stride,
                                                  std::size_t pad) {
  const auto s = static_cast<long long>(stride);
  const long long first = static_cast<long long>(pad) - static_cast<long long>(k);
  const long long last = static_cast<long long>(length) - 1 + first;
  if (last < 0) return {0, 0};
  const long long lo = first > 0 ? (first + s - 1) / s : 0;
  const long long hi = std::min<long long>(static_cast<long long>(out_length), last / s + 1);
  if (lo >= hi) return {0, 0};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace

std::size_t conv_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                               std::size_t pad) {
  if (kernel < 1) throw ConfigError("kernel size must be >= 1");
  if (stride < 1) throw ConfigError("stride must be >= 1");
  if (length + 2 * pad < kernel) {
    throw ConfigError("input length " + std::to_string(length) + " with pad " +
                      std::to_string(pad) + " is shorter than kernel " + std::to_string(kernel));
  }
  return (length + 2 * pad - kernel) / stride + 1;
}

// ---------------------------------------------------------------------------
// conv1d

Var conv1d(const Var& input, const Var& kernel, const Var& bias, std::size_t stride,
           std::size_t pad) {
  const Shape xs = input.shape();
  const Shape ks = kernel.shape();
  if (ks.channels != xs.channels) {
    throw ConfigError("conv1d: kernel expects " + std::to_string(ks.channels) +
                      " input channels, input has " + std::to_string(xs.channels));
  }
  const std::size_t cout = ks.batch, cin = ks.channels, K = ks.length;
  if (bias.defined() && bias.shape() != Shape{1, cout, 1}) {
    throw ConfigError("conv1d: bias shape " + bias.shape().str() + " does not match Cout " +
                      std::to_string(cout));
  }
  const std::size_t L = xs.length;
  const std::size_t lout = conv_output_length(L, K, stride, pad);

  Tensor3 out({xs.batch, cout, lout});
  const auto& x = input.value();
  const auto w = kernel.value().values();
  for (std::size_t b = 0; b < xs.batch; ++b) {
    for (std::size_t o = 0; o < cout; ++o) {
      auto orow = out.row(b, o);
      if (bias.defined()) std::fill(orow.begin(), orow.end(), bias.value().values()[o]);
      for (std::size_t i = 0; i < cin; ++i) {
        auto xrow = x.row(b, i);
        for (std::size_t k = 0; k < K; ++k) {
          const double wv = w[(o * cin + i) * K + k];
          const auto [lo, hi] = valid_outputs(L, lout, k, stride, pad);
          for (std::size_t l = lo; l < hi; ++l) orow[l] += wv * xrow[l * stride + k - pad];
        }
      }
    }
  }

  std::vector<Var> inputs{input, kernel};
  if (bias.defined()) inputs.push_back(bias);
  return Var::make_result(
      std::move(out), std::move(inputs),
      [input, kernel, stride, pad, has_bias = bias.defined(), lout](
          const Tensor3& up, std::span<Tensor3* const> g) {
        const auto& x = input.value();
        const Shape xs = x.shape();
        const Shape ks = kernel.shape();
        const std::size_t cout = ks.batch, cin = ks.channels, K = ks.length, L = xs.length;
        const auto w = kernel.value().values();
        for (std::size_t b = 0; b < xs.batch; ++b) {
          for (std::size_t o = 0; o < cout; ++o) {
            auto urow = up.row(b, o);
            if (has_bias && g[2]) {
              double s = 0.0;
              for (double u : urow) s += u;
              g[2]->values()[o] += s;
            }
            for (std::size_t i = 0; i < cin; ++i) {
              auto xrow = x.row(b, i);
              for (std::size_t k = 0; k < K; ++k) {
                const std::size_t widx = (o * cin + i) * K + k;
                const auto [lo, hi] = valid_outputs(L, lout, k, stride, pad);
                if (g[1]) {
                  double s = 0.0;
                  for (std::size_t l = lo; l < hi; ++l) s += urow[l] * xrow[l * stride + k - pad];
                  g[1]->values()[widx] += s;
                }
                if (g[0]) {
                  auto grow = g[0]->row(b, i);
                  const double wv = w[widx];
                  for (std::size_t l = lo; l < hi; ++l) grow[l * stride + k - pad] += wv * urow[l];
                }
              }
            }
          }
        }
      },
      "conv1d");
}

// ---------------------------------------------------------------------------
// operational_conv1d

Var operational_conv1d(const Var& input, const Var& weights, const Var& bias,
                       std::size_t kernel, std::size_t order, std::size_t stride,
                       std::size_t pad) {
  if (order < 1) throw ConfigError("polynomial order must be >= 1");
  const Shape xs = input.shape();
  const Shape ws = weights.shape();
  if (ws.length != kernel * order) {
    throw ConfigError("operational_conv1d: weight row length " + std::to_string(ws.length) +
                      " != K*Q = " + std::to_string(kernel * order));
  }
  if (ws.channels != xs.channels) {
    throw ConfigError("operational_conv1d: layer expects " + std::to_string(ws.channels) +
                      " input channels, input has " + std::to_string(xs.channels));
  }
  const std::size_t cout = ws.batch, cin = ws.channels, K = kernel, Q = order;
  if (!bias.defined() || bias.shape() != Shape{1, cout, 1}) {
    throw ConfigError("operational_conv1d: bias must have shape [1," + std::to_string(cout) +
                      ",1]");
  }
  const std::size_t L = xs.length;
  const std::size_t lout = conv_output_length(L, K, stride, pad);

  // powers[q] holds x^(q+1).
  auto powers = std::make_shared<std::vector<Tensor3>>();
  powers->reserve(Q);
  powers->push_back(input.value());
  for (std::size_t q = 1; q < Q; ++q) {
    Tensor3 p(xs);
    auto prev = (*powers)[q - 1].values();
    auto x = input.value().values();
    auto pv = p.values();
    for (std::size_t j = 0; j < pv.size(); ++j) pv[j] = prev[j] * x[j];
    powers->push_back(std::move(p));
  }

  Tensor3 out({xs.batch, cout, lout});
  const auto w = weights.value().values();
  const auto bv = bias.value().values();
  for (std::size_t b = 0; b < xs.batch; ++b) {
    for (std::size_t o = 0; o < cout; ++o) {
      auto orow = out.row(b, o);
      std::fill(orow.begin(), orow.end(), bv[o]);
      for (std::size_t i = 0; i < cin; ++i) {
        for (std::size_t k = 0; k < K; ++k) {
          const auto [lo, hi] = valid_outputs(L, lout, k, stride, pad);
          for (std::size_t q = 0; q < Q; ++q) {
            const double wv = w[((o * cin + i) * K + k) * Q + q];
            auto prow = (*powers)[q].row(b, i);
            for (std::size_t l = lo; l < hi; ++l) orow[l] += wv * prow[l * stride + k - pad];
          }
        }
      }
    }
  }

  return Var::make_result(
      std::move(out), {input, weights, bias},
      [weights, powers, K, Q, stride, pad, lout](const Tensor3& up,
                                                std::span<Tensor3* const> g) {
        const Shape xs = (*powers)[0].shape();
        const std::size_t cin = xs.channels, L = xs.length;
        const std::size_t cout = weights.shape().batch;
        const auto w = weights.value().values();
        std::vector<Tensor3> dpow;
        if (g[0]) dpow.assign(Q, Tensor3(xs, 0.0));
        for (std::size_t b = 0; b < xs.batch; ++b) {
          for (std::size_t o = 0; o < cout; ++o) {
            auto urow = up.row(b, o);
            if (g[2]) {
              double s = 0.0;
              for (double u : urow) s += u;
              g[2]->values()[o] += s;
            }
            for (std::size_t i = 0; i < cin; ++i) {
              for (std::size_t k = 0; k < K; ++k) {
                const auto [lo, hi] = valid_outputs(L, lout, k, stride, pad);
                for (std::size_t q = 0; q < Q; ++q) {
                  const std::size_t widx = ((o * cin + i) * K + k) * Q + q;
                  if (g[1]) {
                    auto prow = (*powers)[q].row(b, i);
                    double s = 0.0;
                    for (std::size_t l = lo; l < hi; ++l) s += urow[l] * prow[l * stride + k - pad];
                    g[1]->values()[widx] += s;
                  }
                  if (g[0]) {
                    auto drow = dpow[q].row(b, i);
                    const double wv = w[widx];
                    for (std::size_t l = lo; l < hi; ++l) drow[l * stride + k - pad] += wv * urow[l];
                  }
                }
              }
            }
          }
        }
        if (g[0]) {
          // d(x^(q+1))/dx = (q+1) x^q
          auto gx = g[0]->values();
          auto d0 = dpow[0].values();
          for (std::size_t j = 0; j < gx.size(); ++j) {
            double s = d0[j];
            for (std::size_t q = 1; q < Q; ++q) {
              s += static_cast<double>(q + 1) * (*powers)[q - 1].values()[j] * dpow[q].values()[j];
            }
            gx[j] += s;
          }
        }
      },
      "operational_conv1d");
}

// ---------------------------------------------------------------------------
// elementwise

Var pow(const Var& x, unsigned q) {
  if (q < 1) throw ConfigError("pow: exponent must be >= 1");
  Tensor3 out(x.shape());
  auto in = x.value().values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    double p = in[i];
    for (unsigned e = 1; e < q; ++e) p *= in[i];
    o[i] = p;
  }
  return Var::make_result(
      std::move(out), {x},
      [x, q](const Tensor3& up, std::span<Tensor3* const> g) {
        if (!g[0]) return;
        auto in = x.value().values();
        auto u = up.values();
        auto gx = g[0]->values();
        for (std::size_t i = 0; i < gx.size(); ++i) {
          double d = static_cast<double>(q);
          for (unsigned e = 1; e < q; ++e) d *= in[i];
          gx[i] += d * u[i];
        }
      },
      "pow");
}

Var tanh(const Var& x) {
  Tensor3 out(x.shape());
  auto in = x.value().values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::tanh(in[i]);
  auto saved = std::make_shared<Tensor3>(out);
  return Var::make_result(
      std::move(out), {x},
      [saved](const Tensor3& up, std::span<Tensor3* const> g) {
        if (!g[0]) return;
        auto y = saved->values();
        auto u = up.values();
        auto gx = g[0]->values();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += (1.0 - y[i] * y[i]) * u[i];
      },
      "tanh");
}

Var leaky_relu(const Var& x, double slope) {
  Tensor3 out(x.shape());
  auto in = x.value().values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = in[i] > 0.0 ? in[i] : slope * in[i];
  return Var::make_result(
      std::move(out), {x},
      [x, slope](const Tensor3& up, std::span<Tensor3* const> g) {
        if (!g[0]) return;
        auto in = x.value().values();
        auto u = up.values();
        auto gx = g[0]->values();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += (in[i] > 0.0 ? 1.0 : slope) * u[i];
      },
      "leaky_relu");
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor3 out = a.value();
  out.accumulate(b.value());
  return Var::make_result(
      std::move(out), {a, b},
      [](const Tensor3& up, std::span<Tensor3* const> g) {
        if (g[0]) g[0]->accumulate(up);
        if (g[1]) g[1]->accumulate(up);
      },
      "add");
}

Var scale(const Var& x, double c) {
  Tensor3 out = x.value();
  for (double& v : out.values()) v *= c;
  return Var::make_result(
      std::move(out), {x},
      [c](const Tensor3& up, std::span<Tensor3* const> g) {
        if (!g[0]) return;
        auto u = up.values();
        auto gx = g[0]->values();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += c * u[i];
      },
      "scale");
}

Var upsample2(const Var& x, UpsampleMode mode) {
  const Shape s = x.shape();
  Tensor3 out({s.batch, s.channels, 2 * s.length});
  const auto& in = x.value();
  for (std::size_t b = 0; b < s.batch; ++b) {
    for (std::size_t c = 0; c < s.channels; ++c) {
      auto src = in.row(b, c);
      auto dst = out.row(b, c);
      for (std::size_t m = 0; m < s.length; ++m) {
        dst[2 * m] = src[m];
        if (mode == UpsampleMode::kNearest) {
          dst[2 * m + 1] = src[m];
        } else {
          const std::size_t nxt = std::min(m + 1, s.length - 1);
          dst[2 * m + 1] = 0.5 * (src[m] + src[nxt]);
        }
      }
    }
  }
  return Var::make_result(
      std::move(out), {x},
      [s, mode](const Tensor3& up, std::span<Tensor3* const> g) {
        if (!g[0]) return;
        for (std::size_t b = 0; b < s.batch; ++b) {
          for (std::size_t c = 0; c < s.channels; ++c) {
            auto u = up.row(b, c);
            auto gx = g[0]->row(b, c);
            for (std::size_t m = 0; m < s.length; ++m) {
              if (mode == UpsampleMode::kNearest) {
                gx[m] += u[2 * m] + u[2 * m + 1];
              } else {
                const std::size_t nxt = std::min(m + 1, s.length - 1);
                gx[m] += u[2 * m] + 0.5 * u[2 * m + 1];
                gx[nxt] += 0.5 * u[2 * m + 1];
              }
            }
          }
        }
      },
      mode == UpsampleMode::kNearest ? "upsample2_nearest" : "upsample2_linear");
}

Var crop_pad(const Var& x, std::size_t target_length) {
  if (target_length < 1) throw ConfigError("crop_pad: target length must be >= 1");
  const Shape s = x.shape();
  const bool crop = target_length <= s.length;
  // crop: out[l] = in[l + offset]; pad: out[l + offset] = in[l]
  const std::size_t offset = crop ? (s.length - target_length) / 2 : (target_length - s.length) / 2;
  const std::size_t span = crop ? target_length : s.length;
  Tensor3 out({s.batch, s.channels, target_length});
  for (std::size_t b = 0; b < s.batch; ++b) {
    for (std::size_t c = 0; c < s.channels; ++c) {
      auto src = x.value().row(b, c);
      auto dst = out.row(b, c);
      for (std::size_t l = 0; l < span; ++l) {
        if (crop) dst[l] = src[l + offset];
        else dst[l + offset] = src[l];
      }
    }
  }
  return Var::make_result(
      std::move(out), {x},
      [s, crop, offset, span](const Tensor3& up, std::span<Tensor3* const> g) {
        if (!g[0]) return;
        for (std::size_t b = 0; b < s.batch; ++b) {
          for (std::size_t c = 0; c < s.channels; ++c) {
            auto u = up.row(b, c);
            auto gx = g[0]->row(b, c);
            for (std::size_t l = 0; l < span; ++l) {
              if (crop) gx[l + offset] += u[l];
              else gx[l] += u[l + offset];
            }
          }
        }
      },
      "crop_pad");
}

Var concat_channels(const Var& a, const Var& b) {
  const Shape sa = a.shape(), sb = b.shape();
  if (sa.batch != sb.batch || sa.length != sb.length) {
    throw ConfigError("concat_channels: incompatible shapes " + sa.str() + " and " + sb.str());
  }
  Tensor3 out({sa.batch, sa.channels + sb.channels, sa.length});
  for (std::size_t n = 0; n < sa.batch; ++n) {
    for (std::size_t c = 0; c < sa.channels; ++c) {
      std::ranges::copy(a.value().row(n, c), out.row(n, c).begin());
    }
    for (std::size_t c = 0; c < sb.channels; ++c) {
      std::ranges::copy(b.value().row(n, c), out.row(n, sa.channels + c).begin());
    }
  }
  return Var::make_result(
      std::move(out), {a, b},
      [sa, sb](const Tensor3& up, std::span<Tensor3* const> g) {
        for (std::size_t n = 0; n < sa.batch; ++n) {
          if (g[0]) {
            for (std::size_t c = 0; c < sa.channels; ++c) {
              auto u = up.row(n, c);
              auto gx = g[0]->row(n, c);
              for (std::size_t l = 0; l < sa.length; ++l) gx[l] += u[l];
            }
          }
          if (g[1]) {
            for (std::size_t c = 0; c < sb.channels; ++c) {
              auto u = up.row(n, sa.channels + c);
              auto gx = g[1]->row(n, c);
              for (std::size_t l = 0; l < sb.length; ++l) gx[l] += u[l];
            }
          }
        }
      },
      "concat_channels");
}

Var l1_loss(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "l1_loss");
  auto av = a.value().values();
  auto bv = b.value().values();
  const double n = static_cast<double>(av.size());
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += std::abs(av[i] - bv[i]);
  Tensor3 out({1, 1, 1}, s / n);
  return Var::make_result(
      std::move(out), {a, b},
      [a, b, n](const Tensor3& up, std::span<Tensor3* const> g) {
        auto av = a.value().values();
        auto bv = b.value().values();
        const double u = up.values()[0] / n;
        for (std::size_t i = 0; i < av.size(); ++i) {
          const double d = av[i] - bv[i];
          const double sgn = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
          if (g[0]) g[0]->values()[i] += sgn * u;
          if (g[1]) g[1]->values()[i] -= sgn * u;
        }
      },
      "l1_loss");
}

}  // namespace opgan::ad
