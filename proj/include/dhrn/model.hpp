#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dhrn/adam.hpp"
#include "dhrn/errors.hpp"
#include "dhrn/ops.hpp"
#include "dhrn/rng.hpp"
#include "dhrn/tensor.hpp"

namespace dhrn {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct DhrnConfig {
  int input_len = 0;
  double width_multiplier = 1.0;

  int stem_kernel = 32;
  int stem_stride = 1;
  int stem_channels = 64;
  int pool_kernel = 3;
  int pool_stride = 2;

  std::array<int, 4> group_channels{64, 128, 256, 512};
  std::array<int, 4> group_strides{1, 2, 2, 2};
  int blocks_per_group = 2;
  int block_kernel1 = 32;  // first main-path conv; twice the second
  int block_kernel2 = 16;

  int classes_intensity = 4;
  int classes_detection = 2;

  // shape-changing blocks drop the identity term by default; switching this
  // on adds a zero-padded strided identity instead
  bool strided_identity = false;

  int scaled(int base) const {
    const int c = static_cast<int>(std::llround(base * width_multiplier));
    return c < 1 ? 1 : c;
  }
  int scaled_stem() const { return scaled(stem_channels); }
  int scaled_group(int g) const { return scaled(group_channels[static_cast<std::size_t>(g)]); }
  int pooled_dim() const { return scaled_group(3); }

  void validate() const {
    if (input_len < 1) fail(ErrorKind::InvalidConfig, "input_len must be positive");
    if (width_multiplier <= 0.0) fail(ErrorKind::InvalidConfig, "width_multiplier must be positive");
    if (block_kernel1 != 2 * block_kernel2)
      fail(ErrorKind::InvalidConfig, "first block kernel must be twice the second");
    if (blocks_per_group < 1) fail(ErrorKind::InvalidConfig, "blocks_per_group must be >= 1");
    for (int g = 0; g < 4; ++g) {
      if (group_strides[static_cast<std::size_t>(g)] != 1 && group_strides[static_cast<std::size_t>(g)] != 2)
        fail(ErrorKind::InvalidConfig, "group stride must be 1 or 2");
      if (g > 0 && group_channels[static_cast<std::size_t>(g)] != 2 * group_channels[static_cast<std::size_t>(g - 1)])
        fail(ErrorKind::InvalidConfig, "channels must double per group");
    }
  }
};

// 'same'-length padding, asymmetric for even kernels: left (k-1)/2, right k/2.
inline int same_pad_left(int kernel) { return (kernel - 1) / 2; }
inline int same_pad_right(int kernel) { return kernel / 2; }

// Walks the config symbolically: length after stem conv, stem max-pool and
// all residual groups.
inline int trunk_output_len(const DhrnConfig& cfg) {
  int len = conv1d_out_len(cfg.input_len, cfg.stem_kernel, cfg.stem_stride, same_pad_left(cfg.stem_kernel),
                           same_pad_right(cfg.stem_kernel));
  if (len < cfg.pool_kernel) fail(ErrorKind::InvalidConfig, "input too short for the stem max-pool");
  len = (len - cfg.pool_kernel) / cfg.pool_stride + 1;
  for (int g = 0; g < 4; ++g) {
    const int s = cfg.group_strides[static_cast<std::size_t>(g)];
    len = (len + s - 1) / s;  // 'same' padding: ceil(len / stride), applied by the first block only
    if (len < 1) fail(ErrorKind::InvalidConfig, "input too short for the residual groups");
  }
  return len;
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct DhrbParams {
  Conv1dParams conv1;  // kernel 32, carries the block stride
  BatchNormParams bn1;
  Conv1dParams conv2;  // kernel 16, stride 1
  BatchNormParams bn2;
  Conv1dParams proj;  // kernel-1 projection shortcut, stride matching
  BatchNormParams bn_proj;
  bool add_identity = false;      // plain identity term (shapes match)
  bool strided_identity = false;  // zero-padded strided identity (shapes differ)
};

struct NamedTensor {
  std::string name;
  std::vector<double>* data;
  std::vector<int> dims;
};

struct DhrnModel {
  DhrnConfig cfg;
  Conv1dParams stem;
  BatchNormParams stem_bn;
  std::vector<std::vector<DhrbParams>> groups;
  LinearParams head_intensity;
  LinearParams head_detection;

  // Weighted layers on the main path: stem conv, two convs per block, one
  // classifier stage (the two heads sit in parallel at the same depth).
  int main_path_depth() const {
    int depth = 1;
    for (const auto& g : groups) depth += static_cast<int>(g.size()) * 2;
    return depth + 1;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : const_cast<DhrnModel*>(this)->trainable_params()) n += t.data->size();
    return n;
  }

  std::vector<NamedTensor> trainable_params() {
    std::vector<NamedTensor> out;
    const auto conv = [&out](const std::string& prefix, Conv1dParams& c) {
      out.push_back({prefix + ".w", &c.weight.v, {c.weight.n, c.weight.c, c.weight.l}});
      out.push_back({prefix + ".b", &c.bias, {static_cast<int>(c.bias.size())}});
    };
    const auto bn = [&out](const std::string& prefix, BatchNormParams& b) {
      out.push_back({prefix + ".gamma", &b.gamma, {b.channels()}});
      out.push_back({prefix + ".beta", &b.beta, {b.channels()}});
    };
    conv("stem.conv", stem);
    bn("stem.bn", stem_bn);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      for (std::size_t b = 0; b < groups[g].size(); ++b) {
        const std::string p = "g" + std::to_string(g + 1) + ".b" + std::to_string(b + 1);
        conv(p + ".conv1", groups[g][b].conv1);
        bn(p + ".bn1", groups[g][b].bn1);
        conv(p + ".conv2", groups[g][b].conv2);
        bn(p + ".bn2", groups[g][b].bn2);
        conv(p + ".proj", groups[g][b].proj);
        bn(p + ".bn_proj", groups[g][b].bn_proj);
      }
    }
    out.push_back({"head_intensity.w", &head_intensity.weight.v,
                   {head_intensity.weight.rows, head_intensity.weight.cols}});
    out.push_back({"head_intensity.b", &head_intensity.bias, {static_cast<int>(head_intensity.bias.size())}});
    out.push_back({"head_detection.w", &head_detection.weight.v,
                   {head_detection.weight.rows, head_detection.weight.cols}});
    out.push_back({"head_detection.b", &head_detection.bias, {static_cast<int>(head_detection.bias.size())}});
    return out;
  }

  // Trainable parameters plus batch-norm running statistics.
  std::vector<NamedTensor> state_tensors() {
    std::vector<NamedTensor> out = trainable_params();
    const auto stats = [&out](const std::string& prefix, BatchNormParams& b) {
      out.push_back({prefix + ".running_mean", &b.running_mean, {b.channels()}});
      out.push_back({prefix + ".running_var", &b.running_var, {b.channels()}});
    };
    stats("stem.bn", stem_bn);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      for (std::size_t b = 0; b < groups[g].size(); ++b) {
        const std::string p = "g" + std::to_string(g + 1) + ".b" + std::to_string(b + 1);
        stats(p + ".bn1", groups[g][b].bn1);
        stats(p + ".bn2", groups[g][b].bn2);
        stats(p + ".bn_proj", groups[g][b].bn_proj);
      }
    }
    return out;
  }
};

namespace detail {

inline Conv1dParams make_conv(int out_ch, int in_ch, int kernel, int stride, bool same_pad) {
  Conv1dParams c;
  c.weight = Tensor3(out_ch, in_ch, kernel);
  c.bias.assign(static_cast<std::size_t>(out_ch), 0.0);
  c.stride = stride;
  c.pad_left = same_pad ? same_pad_left(kernel) : 0;
  c.pad_right = same_pad ? same_pad_right(kernel) : 0;
  return c;
}

inline void he_uniform_fill(std::vector<double>& w, int fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& x : w) x = rng.uniform(-bound, bound);
}

}  // namespace detail

// He-uniform (fan-in) initialization with the given seed; BN starts at
// gamma=1, beta=0 and identity running statistics.
inline DhrnModel build_dhrn(const DhrnConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  trunk_output_len(cfg);  // rejects configs whose lengths collapse

  DhrnModel m;
  m.cfg = cfg;
  Rng rng(Rng::mix(seed, 0x6d6f64656c));

  m.stem = detail::make_conv(cfg.scaled_stem(), 1, cfg.stem_kernel, cfg.stem_stride, true);
  detail::he_uniform_fill(m.stem.weight.v, cfg.stem_kernel, rng);
  m.stem_bn = BatchNormParams(cfg.scaled_stem());

  int in_ch = cfg.scaled_stem();
  for (int g = 0; g < 4; ++g) {
    const int out_ch = cfg.scaled_group(g);
    std::vector<DhrbParams> blocks;
    for (int b = 0; b < cfg.blocks_per_group; ++b) {
      const int stride = (b == 0) ? cfg.group_strides[static_cast<std::size_t>(g)] : 1;
      DhrbParams blk;
      blk.conv1 = detail::make_conv(out_ch, in_ch, cfg.block_kernel1, stride, true);
      detail::he_uniform_fill(blk.conv1.weight.v, in_ch * cfg.block_kernel1, rng);
      blk.bn1 = BatchNormParams(out_ch);
      blk.conv2 = detail::make_conv(out_ch, out_ch, cfg.block_kernel2, 1, true);
      detail::he_uniform_fill(blk.conv2.weight.v, out_ch * cfg.block_kernel2, rng);
      blk.bn2 = BatchNormParams(out_ch);
      blk.proj = detail::make_conv(out_ch, in_ch, 1, stride, false);
      detail::he_uniform_fill(blk.proj.weight.v, in_ch, rng);
      blk.bn_proj = BatchNormParams(out_ch);
      blk.add_identity = (in_ch == out_ch && stride == 1);
      blk.strided_identity = !blk.add_identity && cfg.strided_identity;
      blocks.push_back(std::move(blk));
      in_ch = out_ch;
    }
    m.groups.push_back(std::move(blocks));
  }

  m.head_intensity.weight = Matrix(cfg.classes_intensity, cfg.pooled_dim());
  m.head_intensity.bias.assign(static_cast<std::size_t>(cfg.classes_intensity), 0.0);
  detail::he_uniform_fill(m.head_intensity.weight.v, cfg.pooled_dim(), rng);
  m.head_detection.weight = Matrix(cfg.classes_detection, cfg.pooled_dim());
  m.head_detection.bias.assign(static_cast<std::size_t>(cfg.classes_detection), 0.0);
  detail::he_uniform_fill(m.head_detection.weight.v, cfg.pooled_dim(), rng);
  return m;
}

// Same shapes, all values zero. Used as the gradient holder.
inline DhrnModel zeros_like(const DhrnModel& model) {
  DhrnModel z = model;
  for (auto& t : z.state_tensors()) std::fill(t.data->begin(), t.data->end(), 0.0);
  return z;
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

struct DhrbCache {
  Tensor3 input;
  BnCache bn1_cache;
  Tensor3 bn1_out;   // pre-activation of the mid ReLU
  Tensor3 conv2_in;  // relu(bn1_out)
  BnCache bn2_cache;
  BnCache bn_proj_cache;
  Tensor3 pre_relu;  // main + projection (+ identity)
};

namespace detail {

// zero-padded strided identity: keeps every stride-th position, copies the
// input channels into the first slots and pads the rest with zeros
inline Tensor3 strided_identity_map(const Tensor3& x, int out_ch, int stride) {
  const int out_len = (x.l + stride - 1) / stride;
  Tensor3 y(x.n, out_ch, out_len);
  for (int ni = 0; ni < x.n; ++ni)
    for (int c = 0; c < std::min(x.c, out_ch); ++c) {
      const double* xr = x.row(ni, c);
      double* yr = y.row(ni, c);
      for (int i = 0; i < out_len; ++i) yr[i] = xr[i * stride];
    }
  return y;
}

inline void strided_identity_backward(Tensor3& gx, const Tensor3& gy, int stride) {
  for (int ni = 0; ni < gx.n; ++ni)
    for (int c = 0; c < std::min(gx.c, gy.c); ++c) {
      const double* gr = gy.row(ni, c);
      double* xr = gx.row(ni, c);
      for (int i = 0; i < gy.l; ++i) xr[i * stride] += gr[i];
    }
}

}  // namespace detail

// H(x) = ReLU(F(x) + P(x) [+ x]); F is conv32-BN-ReLU-conv16-BN, P is the
// kernel-1 conv + BN projection. The identity term is present only when the
// block keeps shape (or as the optional strided variant). Takes the input by
// value so train-mode caching can keep it without a copy.
inline Tensor3 dhrb_forward(Tensor3 x_in, DhrbParams& p, Mode mode, DhrbCache* cache = nullptr) {
  Tensor3 local;
  Tensor3& x = cache ? cache->input : local;
  x = std::move(x_in);

  Tensor3 main = conv1d_forward(x, p.conv1);
  main = batchnorm_forward(main, p.bn1, mode, cache ? &cache->bn1_cache : nullptr);
  if (cache) {
    cache->bn1_out = std::move(main);
    cache->conv2_in = relu_forward(cache->bn1_out);
    main = conv1d_forward(cache->conv2_in, p.conv2);
  } else {
    main = conv1d_forward(relu_forward(main), p.conv2);
  }
  main = batchnorm_forward(main, p.bn2, mode, cache ? &cache->bn2_cache : nullptr);

  Tensor3 proj = conv1d_forward(x, p.proj);
  proj = batchnorm_forward(proj, p.bn_proj, mode, cache ? &cache->bn_proj_cache : nullptr);

  if (!main.same_shape(proj)) fail(ErrorKind::ShapeMismatch, "dhrb: main and projection paths disagree");
  for (std::size_t i = 0; i < main.size(); ++i) main.v[i] += proj.v[i];
  if (p.add_identity) {
    if (!main.same_shape(x)) fail(ErrorKind::ShapeMismatch, "dhrb: identity shape mismatch");
    for (std::size_t i = 0; i < main.size(); ++i) main.v[i] += x.v[i];
  } else if (p.strided_identity) {
    const Tensor3 idm = detail::strided_identity_map(x, main.c, p.conv1.stride);
    for (std::size_t i = 0; i < main.size(); ++i) main.v[i] += idm.v[i];
  }
  if (!cache) {
    debug_check_finite(main, "dhrb");
    return relu_forward(main);
  }
  cache->pre_relu = std::move(main);
  debug_check_finite(cache->pre_relu, "dhrb");
  return relu_forward(cache->pre_relu);
}

struct DhrbGradResult {
  Tensor3 input;
};

// Accumulates parameter gradients into `grads` (a zeros_like model block) and
// returns the gradient w.r.t. the block input.
inline Tensor3 dhrb_backward(const DhrbParams& p, DhrbParams& grads, const DhrbCache& cache,
                             const Tensor3& grad_out) {
  Tensor3 g = relu_backward(cache.pre_relu, grad_out);

  // main path
  BnGrads bn2 = batchnorm_backward(cache.bn2_cache, g);
  for (int c = 0; c < p.bn2.channels(); ++c) {
    grads.bn2.gamma[c] += bn2.gamma[c];
    grads.bn2.beta[c] += bn2.beta[c];
  }
  Conv1dGrads c2 = conv1d_backward(cache.conv2_in, p.conv2, bn2.x);
  for (std::size_t i = 0; i < c2.weight.size(); ++i) grads.conv2.weight.v[i] += c2.weight.v[i];
  for (std::size_t i = 0; i < c2.bias.size(); ++i) grads.conv2.bias[i] += c2.bias[i];
  Tensor3 g_mid = relu_backward(cache.bn1_out, c2.x);
  BnGrads bn1 = batchnorm_backward(cache.bn1_cache, g_mid);
  for (int c = 0; c < p.bn1.channels(); ++c) {
    grads.bn1.gamma[c] += bn1.gamma[c];
    grads.bn1.beta[c] += bn1.beta[c];
  }
  Conv1dGrads c1 = conv1d_backward(cache.input, p.conv1, bn1.x);
  for (std::size_t i = 0; i < c1.weight.size(); ++i) grads.conv1.weight.v[i] += c1.weight.v[i];
  for (std::size_t i = 0; i < c1.bias.size(); ++i) grads.conv1.bias[i] += c1.bias[i];

  // projection path
  BnGrads bnp = batchnorm_backward(cache.bn_proj_cache, g);
  for (int c = 0; c < p.bn_proj.channels(); ++c) {
    grads.bn_proj.gamma[c] += bnp.gamma[c];
    grads.bn_proj.beta[c] += bnp.beta[c];
  }
  Conv1dGrads cp = conv1d_backward(cache.input, p.proj, bnp.x);
  for (std::size_t i = 0; i < cp.weight.size(); ++i) grads.proj.weight.v[i] += cp.weight.v[i];
  for (std::size_t i = 0; i < cp.bias.size(); ++i) grads.proj.bias[i] += cp.bias[i];

  Tensor3 gin = c1.x;
  for (std::size_t i = 0; i < gin.size(); ++i) gin.v[i] += cp.x.v[i];
  if (p.add_identity) {
    for (std::size_t i = 0; i < gin.size(); ++i) gin.v[i] += g.v[i];
  } else if (p.strided_identity) {
    detail::strided_identity_backward(gin, g, p.conv1.stride);
  }
  return gin;
}

struct ModelCache {
  Tensor3 input;
  BnCache stem_bn_cache;
  Tensor3 stem_bn_out;  // pre-activation of the stem ReLU
  Tensor3 pool_in;      // relu(stem_bn_out)
  MaxPoolCache pool_cache;
  std::vector<std::vector<DhrbCache>> blocks;
  int trunk_len = 0;  // length entering the adaptive average pool
  Matrix pooled;      // (batch, channels) shared by both heads
  bool valid = false;
};

struct ModelOutput {
  Matrix logits_intensity;  // (batch, 4)
  Matrix logits_detection;  // (batch, 2)
};

inline ModelOutput model_forward(DhrnModel& m, const Tensor3& x, Mode mode, ModelCache* cache = nullptr) {
  if (x.c != 1 || x.l != m.cfg.input_len) fail(ErrorKind::ShapeMismatch, "model input must be (batch, 1, input_len)");
  if (cache) {
    cache->blocks.assign(m.groups.size(), {});
    cache->input = x;
    cache->valid = true;
  }

  Tensor3 t = conv1d_forward(x, m.stem);
  t = batchnorm_forward(t, m.stem_bn, mode, cache ? &cache->stem_bn_cache : nullptr);
  if (cache) cache->stem_bn_out = t;
  t = relu_forward(t);
  if (cache) cache->pool_in = t;
  MaxPoolCache local_pool;
  t = maxpool1d_forward(t, m.cfg.pool_kernel, m.cfg.pool_stride, cache ? &cache->pool_cache : &local_pool);

  for (std::size_t g = 0; g < m.groups.size(); ++g) {
    if (cache) cache->blocks[g].resize(m.groups[g].size());
    for (std::size_t b = 0; b < m.groups[g].size(); ++b)
      t = dhrb_forward(std::move(t), m.groups[g][b], mode, cache ? &cache->blocks[g][b] : nullptr);
  }

  if (cache) cache->trunk_len = t.l;
  const Tensor3 pooled3 = adaptive_avgpool_forward(t, 1);
  Matrix pooled(pooled3.n, pooled3.c);
  for (int ni = 0; ni < pooled3.n; ++ni)
    for (int c = 0; c < pooled3.c; ++c) pooled.at(ni, c) = pooled3.at(ni, c, 0);
  if (cache) cache->pooled = pooled;

  ModelOutput out;
  out.logits_intensity = linear_forward(pooled, m.head_intensity);
  out.logits_detection = linear_forward(pooled, m.head_detection);
  return out;
}

// Gradients arrive from both heads; trunk gradients are their sum. Parameter
// gradients accumulate into `grads`, a zeroed shape-clone of the model.
inline void model_backward_into(DhrnModel& m, const ModelCache& cache, const Matrix& grad_logits_intensity,
                                const Matrix& grad_logits_detection, DhrnModel& grads) {
  if (!cache.valid) fail(ErrorKind::StaleCache, "model backward without a train-mode cache");

  LinearGrads gi = linear_backward(cache.pooled, m.head_intensity, grad_logits_intensity);
  LinearGrads gd = linear_backward(cache.pooled, m.head_detection, grad_logits_detection);
  grads.head_intensity.weight = gi.weight;
  grads.head_intensity.bias = gi.bias;
  grads.head_detection.weight = gd.weight;
  grads.head_detection.bias = gd.bias;

  Tensor3 gpool(cache.pooled.rows, cache.pooled.cols, 1);
  for (int ni = 0; ni < gpool.n; ++ni)
    for (int c = 0; c < gpool.c; ++c) gpool.at(ni, c, 0) = gi.x.at(ni, c) + gd.x.at(ni, c);
  Tensor3 g = adaptive_avgpool_backward(cache.trunk_len, gpool);

  for (std::size_t gi_ = m.groups.size(); gi_-- > 0;)
    for (std::size_t b = m.groups[gi_].size(); b-- > 0;)
      g = dhrb_backward(m.groups[gi_][b], grads.groups[gi_][b], cache.blocks[gi_][b], g);

  g = maxpool1d_backward(cache.pool_cache, g);
  g = relu_backward(cache.stem_bn_out, g);
  BnGrads bns = batchnorm_backward(cache.stem_bn_cache, g);
  grads.stem_bn.gamma = bns.gamma;
  grads.stem_bn.beta = bns.beta;
  Conv1dGrads cs = conv1d_backward(cache.input, m.stem, bns.x, /*need_grad_x=*/false);
  grads.stem.weight = cs.weight;
  grads.stem.bias = cs.bias;
}

inline DhrnModel model_backward(DhrnModel& m, const ModelCache& cache, const Matrix& grad_logits_intensity,
                                const Matrix& grad_logits_detection) {
  DhrnModel grads = zeros_like(m);
  model_backward_into(m, cache, grad_logits_intensity, grad_logits_detection, grads);
  return grads;
}

// ---------------------------------------------------------------------------
// Checkpoints: "DHRN" magic, u32 version, length-prefixed config JSON, then
// named tensors as (u32 name length, name, u32 ndim, u32 dims..., f32 data).
// ---------------------------------------------------------------------------

constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

inline std::uint32_t take_u32(const std::string& in, std::size_t& pos) {
  if (pos + 4 > in.size()) fail(ErrorKind::CorruptCheckpoint, "truncated checkpoint");
  const auto* p = reinterpret_cast<const unsigned char*>(in.data() + pos);
  pos += 4;
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline nlohmann::json config_to_json(const DhrnConfig& c) {
  return nlohmann::json{{"input_len", c.input_len},
                        {"width_multiplier", c.width_multiplier},
                        {"stem_kernel", c.stem_kernel},
                        {"stem_stride", c.stem_stride},
                        {"stem_channels", c.stem_channels},
                        {"pool_kernel", c.pool_kernel},
                        {"pool_stride", c.pool_stride},
                        {"group_channels", c.group_channels},
                        {"group_strides", c.group_strides},
                        {"blocks_per_group", c.blocks_per_group},
                        {"block_kernel1", c.block_kernel1},
                        {"block_kernel2", c.block_kernel2},
                        {"classes_intensity", c.classes_intensity},
                        {"classes_detection", c.classes_detection},
                        {"strided_identity", c.strided_identity}};
}

inline DhrnConfig config_from_json(const nlohmann::json& j) {
  DhrnConfig c;
  c.input_len = j.at("input_len").get<int>();
  c.width_multiplier = j.at("width_multiplier").get<double>();
  c.stem_kernel = j.at("stem_kernel").get<int>();
  c.stem_stride = j.at("stem_stride").get<int>();
  c.stem_channels = j.at("stem_channels").get<int>();
  c.pool_kernel = j.at("pool_kernel").get<int>();
  c.pool_stride = j.at("pool_stride").get<int>();
  for (int g = 0; g < 4; ++g) {
    c.group_channels[static_cast<std::size_t>(g)] = j.at("group_channels").at(g).get<int>();
    c.group_strides[static_cast<std::size_t>(g)] = j.at("group_strides").at(g).get<int>();
  }
  c.blocks_per_group = j.at("blocks_per_group").get<int>();
  c.block_kernel1 = j.at("block_kernel1").get<int>();
  c.block_kernel2 = j.at("block_kernel2").get<int>();
  c.classes_intensity = j.at("classes_intensity").get<int>();
  c.classes_detection = j.at("classes_detection").get<int>();
  c.strided_identity = j.at("strided_identity").get<bool>();
  return c;
}

}  // namespace detail

inline void save_checkpoint(DhrnModel& model, const std::string& path) {
  std::string out = "DHRN";
  detail::put_u32(out, kCheckpointVersion);
  const std::string cfg_json = detail::config_to_json(model.cfg).dump();
  detail::put_u32(out, static_cast<std::uint32_t>(cfg_json.size()));
  out += cfg_json;
  for (const auto& t : model.state_tensors()) {
    detail::put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    detail::put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (int d : t.dims) detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : *t.data) {
      const float f = static_cast<float>(v);
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      detail::put_u32(out, u);
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::IoFailure, "cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) fail(ErrorKind::IoFailure, "short write to " + path);
}

inline DhrnModel load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::UnreadableFile, path);
  std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  if (in.size() < 8 || in.compare(0, 4, "DHRN") != 0) fail(ErrorKind::CorruptCheckpoint, "bad magic");
  pos = 4;
  const std::uint32_t version = detail::take_u32(in, pos);
  if (version != kCheckpointVersion)
    fail(ErrorKind::VersionMismatch, "checkpoint version " + std::to_string(version));
  const std::uint32_t cfg_len = detail::take_u32(in, pos);
  if (pos + cfg_len > in.size()) fail(ErrorKind::CorruptCheckpoint, "truncated config block");
  nlohmann::json cfg_json;
  try {
    cfg_json = nlohmann::json::parse(in.substr(pos, cfg_len));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::CorruptCheckpoint, std::string("config block: ") + e.what());
  }
  pos += cfg_len;

  DhrnModel model = build_dhrn(detail::config_from_json(cfg_json), 0);
  std::size_t filled = 0;
  auto tensors = model.state_tensors();
  while (pos < in.size()) {
    const std::uint32_t name_len = detail::take_u32(in, pos);
    if (pos + name_len > in.size()) fail(ErrorKind::CorruptCheckpoint, "truncated tensor name");
    const std::string name = in.substr(pos, name_len);
    pos += name_len;
    const std::uint32_t ndim = detail::take_u32(in, pos);
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) numel *= detail::take_u32(in, pos);
    NamedTensor* target = nullptr;
    for (auto& t : tensors)
      if (t.name == name) target = &t;
    if (!target) fail(ErrorKind::CorruptCheckpoint, "unknown tensor '" + name + "'");
    if (target->data->size() != numel)
      fail(ErrorKind::CorruptCheckpoint, "tensor '" + name + "' has unexpected size");
    for (std::size_t i = 0; i < numel; ++i) {
      const std::uint32_t u = detail::take_u32(in, pos);
      float fv;
      std::memcpy(&fv, &u, 4);
      (*target->data)[i] = static_cast<double>(fv);
    }
    ++filled;
  }
  if (filled != tensors.size()) fail(ErrorKind::CorruptCheckpoint, "checkpoint is missing tensors");
  return model;
}

// Shape audit against the configuration an evaluation expects.
inline DhrnModel load_checkpoint(const std::string& path, const DhrnConfig& expected) {
  DhrnModel m = load_checkpoint(path);
  if (m.cfg.input_len != expected.input_len || m.cfg.width_multiplier != expected.width_multiplier ||
      m.cfg.classes_intensity != expected.classes_intensity ||
      m.cfg.classes_detection != expected.classes_detection)
    fail(ErrorKind::VersionMismatch, "checkpoint shape does not match the expected configuration");
  return m;
}

}  // namespace dhrn
