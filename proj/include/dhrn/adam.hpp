#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dhrn/errors.hpp"

namespace dhrn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moments for one optimization step over a list of parameter tensors.
// `step` is incremented once per adam_step call, not per tensor.
struct AdamState {
  AdamConfig cfg;
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  void init(const std::vector<std::span<double>>& params) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.emplace_back(p.size(), 0.0);
      v.emplace_back(p.size(), 0.0);
    }
  }
};

namespace detail {

inline void adam_update_tensor(std::span<double> param, std::span<const double> grad, std::vector<double>& m,
                               std::vector<double>& v, std::int64_t t, const AdamConfig& cfg) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    param[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

}  // namespace detail

// Bias-corrected Adam over parallel parameter/gradient tensor lists.
inline void adam_step(const std::vector<std::span<double>>& params,
                      const std::vector<std::span<const double>>& grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    fail(ErrorKind::ShapeMismatch, "adam_step: parameter/gradient list mismatch");
  ++state.step;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size() || params[i].size() != state.m[i].size())
      fail(ErrorKind::ShapeMismatch, "adam_step: tensor size mismatch");
    detail::adam_update_tensor(params[i], grads[i], state.m[i], state.v[i], state.step, state.cfg);
  }
}

}  // namespace dhrn
