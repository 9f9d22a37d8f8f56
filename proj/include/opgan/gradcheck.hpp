#pragma once

#include <functional>
#include <span>
#include <string>

#include "opgan/autodiff.hpp"

namespace opgan::ad {

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  /// Relative errors use max(|analytic|, |numeric|, denom_floor) as denominator,
  /// so exact-zero gradients compare against rounding noise sensibly.
  double denom_floor = 1e-6;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::size_t checked = 0;
  /// Coordinates whose +/- step flipped the sign of some output element. The
  /// |.| reduction has a kink there, so central differences are meaningless.
  std::size_t skipped_kinks = 0;
  bool pass = false;
  std::string worst;  // "<param index>[<element>]: analytic=.. numeric=.."
};

using Fragment = std::function<Var(const Var& input)>;

/// Reduces fragment(input) with l1_loss against zeros and compares every
/// element of every parameter gradient (and the input gradient when the input
/// requires one) with two-sided finite differences.
GradCheckReport grad_check(const Fragment& fragment, Var input, std::span<Var> params,
                           const GradCheckOptions& opts = {});

}  // namespace opgan::ad
