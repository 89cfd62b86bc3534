#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "aps/net.hpp"
#include "aps/rng.hpp"

// Shared helpers for the test suites. Everything here is deliberately
// independent of the library's backward pass so it can serve as an oracle.
namespace test_util {

inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Scalar objective used for gradient checks: dot(forward(net, x), g).
inline double scalar_objective(const aps::DenseNet& net, std::span<const double> input,
                               const aps::Vec& gvec) {
  const aps::Vec out = aps::forward(net, input);
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * gvec[i];
  return s;
}

struct GradCheckResult {
  int checked = 0;
  int failures = 0;
  double max_rel_err = 0.0;
};

/// Central finite differences over every parameter of `net` (or a random
/// subset of `max_params_per_layer` per tensor when positive), compared to
/// the analytic bundle.
inline GradCheckResult check_param_gradients(aps::DenseNet net, const aps::Vec& input,
                                             const aps::Vec& gvec, double h = 1e-5,
                                             double tol = 1e-4,
                                             int max_params_per_tensor = 0,
                                             aps::Rng* pick_rng = nullptr) {
  const aps::GradientBundle analytic = aps::backward(net, input, gvec);
  GradCheckResult res;

  auto check_one = [&](double* param, double analytic_grad) {
    const double saved = *param;
    *param = saved + h;
    const double up = scalar_objective(net, input, gvec);
    *param = saved - h;
    const double down = scalar_objective(net, input, gvec);
    *param = saved;
    const double fd = (up - down) / (2.0 * h);
    const double err = rel_err(fd, analytic_grad);
    res.checked += 1;
    res.max_rel_err = std::max(res.max_rel_err, err);
    if (err > tol) res.failures += 1;
  };

  auto indices_for = [&](std::size_t n) {
    std::vector<std::size_t> idx;
    if (max_params_per_tensor <= 0 || n <= static_cast<std::size_t>(max_params_per_tensor)) {
      for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
    } else {
      for (int i = 0; i < max_params_per_tensor; ++i)
        idx.push_back(static_cast<std::size_t>(pick_rng->below(static_cast<int>(n))));
    }
    return idx;
  };

  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    for (std::size_t i : indices_for(net.layers[l].wt.data.size()))
      check_one(&net.layers[l].wt.data[i], analytic.wt[l].data[i]);
    for (std::size_t i : indices_for(net.layers[l].bias.size()))
      check_one(&net.layers[l].bias[i], analytic.bias[l][i]);
  }
  return res;
}

/// Finite differences with respect to the input vector.
inline GradCheckResult check_input_gradients(const aps::DenseNet& net, aps::Vec input,
                                             const aps::Vec& gvec, double h = 1e-5,
                                             double tol = 1e-4) {
  const aps::GradientBundle analytic = aps::backward(net, input, gvec);
  GradCheckResult res;
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double saved = input[i];
    input[i] = saved + h;
    const double up = scalar_objective(net, input, gvec);
    input[i] = saved - h;
    const double down = scalar_objective(net, input, gvec);
    input[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double err = rel_err(fd, analytic.input[i]);
    res.checked += 1;
    res.max_rel_err = std::max(res.max_rel_err, err);
    if (err > tol) res.failures += 1;
  }
  return res;
}

inline aps::Vec random_vec(aps::Rng& rng, std::size_t n, double scale = 1.0) {
  aps::Vec v(n);
  for (auto& x : v) x = (2.0 * rng.uniform() - 1.0) * scale;
  return v;
}

}  // namespace test_util
