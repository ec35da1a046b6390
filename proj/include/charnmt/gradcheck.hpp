// SPDX-License-Identifier: Apache-2.0
#pragma once

// Central finite-difference verification of reverse-mode gradients.
// The loss callable must be deterministic and must rebuild the forward
// pass on every call; it runs once under a tape to collect analytic
// gradients and then twice per parameter element without one.

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "charnmt/tensor.hpp"

namespace charnmt {

struct GradCheckEntry {
  std::string name;
  std::size_t elements = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

struct GradCheckReport {
  double step = 0.0;
  double tolerance = 0.0;
  std::vector<GradCheckEntry> entries;

  bool ok() const {
    for (const auto& e : entries)
      if (e.max_rel_error >= tolerance) return false;
    return true;
  }

  const GradCheckEntry& worst() const {
    std::size_t w = 0;
    for (std::size_t i = 1; i < entries.size(); ++i)
      if (entries[i].max_rel_error > entries[w].max_rel_error) w = i;
    return entries[w];
  }
};

// Relative error with a floor on the denominator: differences far below
// `floor` in magnitude are treated as noise rather than blown up into
// large ratios.  With h = 1e-4 the central-difference truncation error
// sits near 1e-8, so the default floor keeps honest comparisons for
// every gradient large enough to matter.
inline double relative_error(double a, double b, double floor = 1e-4) {
  const double denom = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / denom;
}

// Checks d(loss)/d(theta) for every parameter in `params` that tracks
// gradients.  `loss_fn` returns the scalar loss tensor.  `after_backward`
// (when set) runs between the analytic pass and the numeric sweep; the
// fault-injection tests use it to corrupt one stored gradient and prove
// the checker notices.
inline GradCheckReport check_gradients(
    ParamSet<double>& params, const std::function<Tensor<double>()>& loss_fn,
    double h = 1e-4, double tolerance = 1e-3, double rel_floor = 1e-4,
    const std::function<void(ParamSet<double>&)>& after_backward = nullptr) {
  GradCheckReport report;
  report.step = h;
  report.tolerance = tolerance;

  params.zero_grads();
  {
    Tape<double> tape;
    Tensor<double> loss = loss_fn();
    tape.backward(loss);
  }
  if (after_backward) after_backward(params);

  for (auto& item : params) {
    if (!item.tensor.requires_grad()) continue;
    GradCheckEntry entry;
    entry.name = item.name;
    entry.elements = item.tensor.numel();
    std::vector<double>& theta = item.tensor.values();
    const std::vector<double>& analytic = item.tensor.grad();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta[i];
      theta[i] = saved + h;
      const double up = loss_fn().scalar_value();
      theta[i] = saved - h;
      const double down = loss_fn().scalar_value();
      theta[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double err = relative_error(analytic[i], numeric, rel_floor);
      if (err >= entry.max_rel_error) {
        entry.max_rel_error = err;
        entry.worst_index = i;
        entry.analytic_at_worst = analytic[i];
        entry.numeric_at_worst = numeric;
      }
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace charnmt
