#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dhrn/model.hpp"
#include "dhrn/ops.hpp"
#include "dhrn/rng.hpp"

namespace dhrn {

// Central finite differences (h = 1e-5) against every hand-written backward
// pass. Shared by the test suites and the CLI's gradcheck command.

struct GradCheckOptions {
  std::uint64_t seed = 0;
  int seeds_per_op = 20;
  double tolerance = 1e-4;
  double h = 1e-5;
  int model_param_samples = 60;
  // test fixture: corrupts the analytic conv weight gradient so the harness
  // itself can be shown to catch a broken backward pass
  bool flip_conv_weight_grad = false;
};

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0.0;
  bool ok = true;
};

namespace gradcheck_detail {

inline double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

inline void fill_uniform(std::vector<double>& v, Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (auto& x : v) x = rng.uniform(lo, hi);
}

// values with pairwise gaps well above h and magnitudes bounded away from
// zero; safe for max-pool and ReLU probes
inline void fill_distinct(std::vector<double>& v, Rng& rng) {
  std::vector<std::size_t> perm(v.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(perm);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double magnitude = 0.05 + 0.01 * static_cast<double>(perm[i]);
    v[i] = rng.uniform01() < 0.5 ? -magnitude : magnitude;
  }
}

// scalar objective sum(grad_out * f(input)) probed elementwise
inline double fd_probe(std::vector<double>& storage, std::size_t index, double h,
                       const std::function<double()>& loss) {
  const double keep = storage[index];
  storage[index] = keep + h;
  const double up = loss();
  storage[index] = keep - h;
  const double down = loss();
  storage[index] = keep;
  return (up - down) / (2.0 * h);
}

inline double weighted_sum(const Tensor3& y, const Tensor3& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y.v[i] * w.v[i];
  return s;
}

inline double weighted_sum(const Matrix& y, const Matrix& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.v.size(); ++i) s += y.v[i] * w.v[i];
  return s;
}

}  // namespace gradcheck_detail

inline GradCheckResult check_conv1d(const GradCheckOptions& opt) {
  namespace gd = gradcheck_detail;
  GradCheckResult r{"conv1d", 0.0, true};
  for (int s = 0; s < opt.seeds_per_op; ++s) {
    Rng rng(Rng::mix(opt.seed, 0x1000 + static_cast<std::uint64_t>(s)));
    const int n = 1 + static_cast<int>(rng.below(3));
    const int cin = 1 + static_cast<int>(rng.below(3));
    const int cout = 1 + static_cast<int>(rng.below(3));
    const int k = 1 + static_cast<int>(rng.below(5));
    const int stride = 1 + static_cast<int>(rng.below(2));
    Conv1dParams p;
    p.stride = stride;
    p.pad_left = static_cast<int>(rng.below(3));
    p.pad_right = static_cast<int>(rng.below(3));
    const int l = k + stride * (2 + static_cast<int>(rng.below(5)));
    p.weight = Tensor3(cout, cin, k);
    p.bias.assign(static_cast<std::size_t>(cout), 0.0);
    Tensor3 x(n, cin, l);
    gd::fill_uniform(x.v, rng);
    gd::fill_uniform(p.weight.v, rng);
    gd::fill_uniform(p.bias, rng);
    Tensor3 gout(n, cout, conv1d_out_len(l, k, stride, p.pad_left, p.pad_right));
    gd::fill_uniform(gout.v, rng);

    Conv1dGrads g = conv1d_backward(x, p, gout);
    if (opt.flip_conv_weight_grad)
      for (auto& v : g.weight.v) v = -v;
    const auto loss = [&] { return gd::weighted_sum(conv1d_forward(x, p), gout); };
    for (std::size_t i = 0; i < x.v.size(); ++i)
      r.max_rel_err = std::max(r.max_rel_err, gd::rel_err(g.x.v[i], gd::fd_probe(x.v, i, opt.h, loss)));
    for (std::size_t i = 0; i < p.weight.v.size(); ++i)
      r.max_rel_err = std::max(r.max_rel_err, gd::rel_err(g.weight.v[i], gd::fd_probe(p.weight.v, i, opt.h, loss)));
    for (std::size_t i = 0; i < p.bias.size(); ++i)
      r.max_rel_err = std::max(r.max_rel_err, gd::rel_err(g.bias[i], gd::fd_probe(p.bias, i, opt.h, loss)));
  }
  r.ok = r.max_rel_err <= opt.tolerance;
  return r;
}

inline GradCheckResult check_batchnorm(const GradCheckOptions& opt) {
  namespace gd = gradcheck_detail;
  GradCheckResult r{"batchnorm_train", 0.0, true};
  for (int s = 0; s < opt.seeds_per_op; ++s) {
    Rng rng(Rng::mix(opt.seed, 0x2000 + static_cast<std::uint64_t>(s)));
    const int n = 2 + static_cast<int>(rng.below(2));
    const int c = 1 + static_cast<int>(rng.below(4));
    const int l = 2 + static_cast<int>(rng.below(6));
    Tensor3 x(n, c, l);
    gd::fill_uniform(x.v, rng, -2.0, 2.0);
    BatchNormParams p(c);
    gd::fill_uniform(p.gamma, rng, 0.5, 1.5);
    gd::fill_uniform(p.beta, rng, -0.5, 0.5);
    Tensor3 gout(n, c, l);
    gd::fill_uniform(gout.v, rng);

    BatchNormParams work = p;  // running stats churn is irrelevant to the output
    BnCache cache;
    batchnorm_forward(x, work, Mode::Train, &cache);
    BnGrads g = batchnorm_backward(cache, gout);
    const auto loss = [&] {
      BatchNormParams fresh = p;
      return gd::weighted_sum(batchnorm_forward(x, fresh, Mode::Train), gout);
    };
    for (std::size_t i = 0; i < x.v.size(); ++i)
      r.max_rel_err = std::max(r.max_rel_err, gd::rel_err(g.x.v[i], gd::fd_probe(x.v, i, opt.h, loss)));
    for (std::size_t i = 0; i < p.gamma.size(); ++i)
      r.max_rel_err = std::max(r.max_rel_err, gd::rel_err(g.gamma[i], gd::fd_probe(p.gamma, i, opt.h, loss)));
    for (std::size_t i = 0; i < p.beta.size(); ++i)
      r.max_rel_err = std::max(r.max_rel_err, gd::rel_err(g.beta[i], gd::fd_probe(p.beta, i, opt.h, loss)));
  }
  r.ok = r.max_rel_err <= opt.tolerance;
  return r;
}

inline GradCheckResult check_relu(const GradCheckOptions& opt) {
  namespace gd = gradcheck_detail;
  GradCheckResult r{"relu", 0.0, true};
  for (int s = 0; s < opt.seeds_per_op; ++s) {
    Rng rng(Rng::mix(opt.seed, 0x3000 + static_cast<std::uint64_t>(s)));
    Tensor3 x(1 + static_cast<int>(rng.below(3)), 1 + static_cast<int>(rng.below(3)),
              2 + static_cast<int>(rng.below(8)));
    gd::fill_distinct(x.v, rng);
    Tensor3 gout(x.n, x.c, x.l);
    gd::fill_uniform(gout.v, rng);
    const Tensor3 g = relu_backward(x, gout);
    const auto loss = [&] { return gd::weighted_sum(relu_forward(x), gout); };
    for (std::size_t i = 0; i < x.v.size(); ++i)
      r.max_rel_err = std::max(r.max_rel_err, gd::rel_err(g.v[i], gd::fd_probe(x.v, i, opt.h, loss)));
  }
  r.ok = r.max_rel_err <= opt.tolerance;
  return r;
}

inline GradCheckResult check_maxpool(const GradCheckOptions& opt) {
  namespace gd = gradcheck_detail;
  GradCheckResult r{"maxpool1d", 0.0, true};
  for (int s = 0; s < opt.seeds_per_op; ++s) {
    Rng rng(Rng::mix(opt.seed, 0x4000 + static_cast<std::uint64_t>(s)));
    const int k = 1 + static_cast<int>(rng.below(3));
    const int stride = 1 + static_cast<int>(rng.below(3));
    const int l = k + stride * (1 + static_cast<int>(rng.below(5)));
    Tensor3 x(1 + static_cast<int>(rng.below(2)), 1 + static_cast<int>(rng.below(3)), l);
    gd::fill_distinct(x.v, rng);
    MaxPoolCache cache;
    const Tensor3 y = maxpool1d_forward(x, k, stride, &cache);
    Tensor3 gout(y.n, y.c, y.l);
    gd::fill_uniform(gout.v, rng);
    const Tensor3 g = maxpool1d_backward(cache, gout);
    const auto loss = [&] { return gd::weighted_sum(maxpool1d_forward(x, k, stride), gout); };
    for (std::size_t i = 0; i < x.v.size(); ++i)
      r.max_rel_err = std::max(r.max_rel_err, gd::rel_err(g.v[i], gd::fd_probe(x.v, i, opt.h, loss)));
  }
  r.ok = r.max_rel_err <= opt.tolerance;
  return r;
}

inline GradCheckResult check_avgpool(const GradCheckOptions& opt) {
  namespace gd = gradcheck_detail;
  GradCheckResult r{"adaptive_avgpool", 0.0, true};
  for (int s = 0; s < opt.seeds_per_op; ++s) {
    Rng rng(Rng::mix(opt.seed, 0x5000 + static_cast<std::uint64_t>(s)));
    const int l = 2 + static_cast<int>(rng.below(10));
    const int h = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(l)));
    Tensor3 x(1 + static_cast<int>(rng.below(2)), 1 + static_cast<int>(rng.below(3)), l);
    gd::fill_uniform(x.v, rng);
    Tensor3 gout(x.n, x.c, h);
    gd::fill_uniform(gout.v, rng);
    const Tensor3 g = adaptive_avgpool_backward(l, gout);
    const auto loss = [&] { return gd::weighted_sum(adaptive_avgpool_forward(x, h), gout); };
    for (std::size_t i = 0; i < x.v.size(); ++i)
      r.max_rel_err = std::max(r.max_rel_err, gd::rel_err(g.v[i], gd::fd_probe(x.v, i, opt.h, loss)));
  }
  r.ok = r.max_rel_err <= opt.tolerance;
  return r;
}

inline GradCheckResult check_linear(const GradCheckOptions& opt) {
  namespace gd = gradcheck_detail;
  GradCheckResult r{"linear", 0.0, true};
  for (int s = 0; s < opt.seeds_per_op; ++s) {
    Rng rng(Rng::mix(opt.seed, 0x6000 + static_cast<std::uint64_t>(s)));
    const int n = 1 + static_cast<int>(rng.below(3));
    const int in = 1 + static_cast<int>(rng.below(6));
    const int out = 1 + static_cast<int>(rng.below(4));
    Matrix x(n, in);
    gd::fill_uniform(x.v, rng);
    LinearParams p;
    p.weight = Matrix(out, in);
    p.bias.assign(static_cast<std::size_t>(out), 0.0);
    gd::fill_uniform(p.weight.v, rng);
    gd::fill_uniform(p.bias, rng);
    Matrix gout(n, out);
    gd::fill_uniform(gout.v, rng);
    const LinearGrads g = linear_backward(x, p, gout);
    const auto loss = [&] { return gd::weighted_sum(linear_forward(x, p), gout); };
    for (std::size_t i = 0; i < x.v.size(); ++i)
      r.max_rel_err = std::max(r.max_rel_err, gd::rel_err(g.x.v[i], gd::fd_probe(x.v, i, opt.h, loss)));
    for (std::size_t i = 0; i < p.weight.v.size(); ++i)
      r.max_rel_err = std::max(r.max_rel_err, gd::rel_err(g.weight.v[i], gd::fd_probe(p.weight.v, i, opt.h, loss)));
    for (std::size_t i = 0; i < p.bias.size(); ++i)
      r.max_rel_err = std::max(r.max_rel_err, gd::rel_err(g.bias[i], gd::fd_probe(p.bias, i, opt.h, loss)));
  }
  r.ok = r.max_rel_err <= opt.tolerance;
  return r;
}

inline GradCheckResult check_cross_entropy(const GradCheckOptions& opt) {
  namespace gd = gradcheck_detail;
  GradCheckResult r{"cross_entropy", 0.0, true};
  for (int s = 0; s < opt.seeds_per_op; ++s) {
    Rng rng(Rng::mix(opt.seed, 0x7000 + static_cast<std::uint64_t>(s)));
    const int n = 1 + static_cast<int>(rng.below(4));
    const int c = 2 + static_cast<int>(rng.below(4));
    Matrix logits(n, c);
    gd::fill_uniform(logits.v, rng, -2.0, 2.0);
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) labels.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(c))));
    const auto ce = cross_entropy(logits, labels);
    const auto loss = [&] { return cross_entropy(logits, labels).loss; };
    for (std::size_t i = 0; i < logits.v.size(); ++i)
      r.max_rel_err =
          std::max(r.max_rel_err, gd::rel_err(ce.grad_logits.v[i], gd::fd_probe(logits.v, i, opt.h, loss)));
  }
  r.ok = r.max_rel_err <= opt.tolerance;
  return r;
}

// Spot check of the assembled network (width 0.0625, input 64): analytic
// parameter gradients of w_a*CE_det + w_b*CE_int versus finite differences on
// randomly sampled parameters.
inline GradCheckResult check_full_model(const GradCheckOptions& opt) {
  namespace gd = gradcheck_detail;
  GradCheckResult r{"full_model", 0.0, true};
  DhrnConfig cfg;
  cfg.input_len = 64;
  cfg.width_multiplier = 0.0625;
  DhrnModel model = build_dhrn(cfg, Rng::mix(opt.seed, 0x8000));

  Rng rng(Rng::mix(opt.seed, 0x8001));
  Tensor3 x(2, 1, cfg.input_len);
  gd::fill_uniform(x.v, rng);
  const std::vector<int> labels_det = {0, 1};
  const std::vector<int> labels_int = {1, 3};
  const double w_det = 1.0, w_int = 1.0;

  ModelCache cache;
  const auto out = model_forward(model, x, Mode::Train, &cache);
  auto ce_det = cross_entropy(out.logits_detection, labels_det);
  auto ce_int = cross_entropy(out.logits_intensity, labels_int);
  for (auto& v : ce_det.grad_logits.v) v *= w_det;
  for (auto& v : ce_int.grad_logits.v) v *= w_int;
  DhrnModel analytic = model_backward(model, cache, ce_int.grad_logits, ce_det.grad_logits);

  auto params = model.trainable_params();
  auto grads = analytic.trainable_params();
  std::size_t total = 0;
  for (const auto& t : params) total += t.data->size();

  const auto loss_at = [&](DhrnModel& probe) {
    const auto o = model_forward(probe, x, Mode::Train);
    return w_det * cross_entropy(o.logits_detection, labels_det).loss +
           w_int * cross_entropy(o.logits_intensity, labels_int).loss;
  };

  for (int s = 0; s < opt.model_param_samples; ++s) {
    std::size_t flat = rng.below(total);
    std::size_t ti = 0;
    while (flat >= params[ti].data->size()) {
      flat -= params[ti].data->size();
      ++ti;
    }
    DhrnModel probe = model;
    auto probe_params = probe.trainable_params();
    double* slot = &(*probe_params[ti].data)[flat];
    const double keep = *slot;
    *slot = keep + opt.h;
    const double up = loss_at(probe);
    *slot = keep - opt.h;
    const double down = loss_at(probe);
    *slot = keep;
    const double numeric = (up - down) / (2.0 * opt.h);
    r.max_rel_err = std::max(r.max_rel_err, gd::rel_err((*grads[ti].data)[flat], numeric));
  }
  r.ok = r.max_rel_err <= opt.tolerance;
  return r;
}

inline std::vector<GradCheckResult> run_gradcheck_suite(const GradCheckOptions& opt) {
  return {check_conv1d(opt),  check_batchnorm(opt), check_relu(opt),          check_maxpool(opt),
          check_avgpool(opt), check_linear(opt),    check_cross_entropy(opt), check_full_model(opt)};
}

}  // namespace dhrn
