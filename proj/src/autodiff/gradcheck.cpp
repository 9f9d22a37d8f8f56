#include "opgan/gradcheck.hpp"

#include <cmath>
#include <cstdio>
#include <vector>

namespace opgan::ad {

namespace {

double mean_abs(const Tensor3& t) {
  double s = 0.0;
  for (double v : t.values()) s += std::abs(v);
  return s / static_cast<double>(t.numel());
}

bool crosses_kink(const Tensor3& base, const Tensor3& moved) {
  auto a = base.values();
  auto b = moved.values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const int sa = (a[i] > 0.0) - (a[i] < 0.0);
    const int sb = (b[i] > 0.0) - (b[i] < 0.0);
    if (sa != sb) return true;
  }
  return false;
}

}  // namespace

GradCheckReport grad_check(const Fragment& fragment, Var input, std::span<Var> params,
                           const GradCheckOptions& opts) {
  std::vector<Var> targets(params.begin(), params.end());
  if (input.requires_grad()) targets.push_back(input);

  for (auto& p : targets) p.zero_grad();
  Var out = fragment(input);
  const Tensor3 base = out.value();
  l1_loss(out, Var::full(out.shape(), 0.0)).backward();

  std::vector<Tensor3> analytic;
  analytic.reserve(targets.size());
  for (auto& p : targets) analytic.push_back(p.grad());

  GradCheckReport report;
  const double h = opts.step;
  for (std::size_t pi = 0; pi < targets.size(); ++pi) {
    Var& p = targets[pi];
    const std::size_t n = p.value().numel();
    for (std::size_t j = 0; j < n; ++j) {
      const double orig = p.value().values()[j];
      p.mutable_value().values()[j] = orig + h;
      const Tensor3 plus = fragment(input).value();
      p.mutable_value().values()[j] = orig - h;
      const Tensor3 minus = fragment(input).value();
      p.mutable_value().values()[j] = orig;

      if (crosses_kink(base, plus) || crosses_kink(base, minus)) {
        ++report.skipped_kinks;
        continue;
      }
      const double numeric = (mean_abs(plus) - mean_abs(minus)) / (2.0 * h);
      const double a = analytic[pi].values()[j];
      const double abs_err = std::abs(a - numeric);
      const double denom = std::max({std::abs(a), std::abs(numeric), opts.denom_floor});
      const double rel = abs_err / denom;
      ++report.checked;
      report.max_abs_err = std::max(report.max_abs_err, abs_err);
      if (rel > report.max_rel_err || report.worst.empty()) {
        report.max_rel_err = std::max(report.max_rel_err, rel);
        if (rel >= report.max_rel_err) {
          char buf[160];
          std::snprintf(buf, sizeof buf, "%zu[%zu]: analytic=%.10g numeric=%.10g", pi, j, a,
                        numeric);
          report.worst = buf;
        }
      }
    }
  }
  report.pass = report.checked > 0 && report.max_rel_err <= opts.tolerance;
  return report;
}

}  // namespace opgan::ad
