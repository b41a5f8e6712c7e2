#include <doctest.h>

#include <vector>

#include "dhrn/ops.hpp"
#include "dhrn/rng.hpp"
#include "support/oracles.hpp"

using namespace dhrn;

namespace {

Conv1dParams make_conv(std::vector<double> w, int out_ch, int in_ch, int k, std::vector<double> b, int stride,
                       int pl = 0, int pr = 0) {
  Conv1dParams p;
  p.weight = Tensor3(out_ch, in_ch, k);
  p.weight.v = std::move(w);
  p.bias = std::move(b);
  p.stride = stride;
  p.pad_left = pl;
  p.pad_right = pr;
  return p;
}

Tensor3 tensor1(std::vector<double> vals) {
  Tensor3 t(1, 1, static_cast<int>(vals.size()));
  t.v = std::move(vals);
  return t;
}

}  // namespace

TEST_CASE("sliding dot product") {
  const auto y = conv1d_forward(tensor1({1, 2, 3, 4}), make_conv({1, 1}, 1, 1, 2, {0}, 1));
  CHECK(y.v == std::vector<double>{3, 5, 7});
}

TEST_CASE("unit kernel is the identity") {
  const Tensor3 x = tensor1({4, -1, 2.5});
  const auto y = conv1d_forward(x, make_conv({1}, 1, 1, 1, {0}, 1));
  CHECK(y.v == x.v);
}

TEST_CASE("stride two with bias") {
  const Tensor3 x = tensor1({1, 2, 3, 4});
  const auto p = make_conv({1, 1}, 1, 1, 2, {10}, 2);
  const auto want = oracle::conv1d_naive(x, p.weight, p.bias, 2, 0, 0);
  CHECK(want.v == std::vector<double>{13, 17});
  const auto y = conv1d_forward(x, p);
  CHECK(y.v == want.v);
}

TEST_CASE("forward matches the naive loop bit for bit over random shapes") {
  for (int trial = 0; trial < 30; ++trial) {
    Rng rng(500 + trial);
    const int n = 1 + static_cast<int>(rng.below(3));
    const int cin = 1 + static_cast<int>(rng.below(4));
    const int cout = 1 + static_cast<int>(rng.below(5));
    const int k = 1 + static_cast<int>(rng.below(6));
    const int stride = 1 + static_cast<int>(rng.below(2));
    const int pl = static_cast<int>(rng.below(4));
    const int pr = static_cast<int>(rng.below(4));
    const int l = k + stride * static_cast<int>(rng.below(80));
    Conv1dParams p;
    p.weight = Tensor3(cout, cin, k);
    p.bias.assign(static_cast<std::size_t>(cout), 0.0);
    p.stride = stride;
    p.pad_left = pl;
    p.pad_right = pr;
    Tensor3 x(n, cin, l);
    for (auto& v : x.v) v = rng.uniform(-1.0, 1.0);
    for (auto& v : p.weight.v) v = rng.uniform(-1.0, 1.0);
    for (auto& v : p.bias) v = rng.uniform(-1.0, 1.0);

    const Tensor3 fast = conv1d_forward(x, p);
    const Tensor3 slow = oracle::conv1d_naive(x, p.weight, p.bias, stride, pl, pr);
    REQUIRE(fast.same_shape(slow));
    for (std::size_t i = 0; i < fast.size(); ++i) CHECK(fast.v[i] == slow.v[i]);
  }
}

TEST_CASE("bias gradient is the per-channel sum of grad_out") {
  Rng rng(7);
  Tensor3 x(2, 2, 9);
  for (auto& v : x.v) v = rng.uniform(-1.0, 1.0);
  Conv1dParams p;
  p.weight = Tensor3(3, 2, 3);
  p.bias.assign(3, 0.0);
  p.stride = 2;
  for (auto& v : p.weight.v) v = rng.uniform(-1.0, 1.0);
  Tensor3 gout(2, 3, conv1d_out_len(9, 3, 2, 0, 0));
  for (auto& v : gout.v) v = rng.uniform(-1.0, 1.0);

  const auto g = conv1d_backward(x, p, gout);
  for (int j = 0; j < 3; ++j) {
    double want = 0.0;
    for (int ni = 0; ni < 2; ++ni)
      for (int i = 0; i < gout.l; ++i) want += gout.at(ni, j, i);
    CHECK(g.bias[static_cast<std::size_t>(j)] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("unit kernel backward passes grad_out through") {
  Tensor3 x = tensor1({1, 2, 3});
  Tensor3 gout = tensor1({0.5, -1.0, 2.0});
  const auto g = conv1d_backward(x, make_conv({1}, 1, 1, 1, {0}, 1), gout);
  CHECK(g.x.v == gout.v);
}

TEST_CASE("shape errors") {
  CHECK_THROWS_AS((void)conv1d_forward(tensor1({1, 2}), make_conv({1, 1, 1, 1}, 1, 2, 2, {0}, 1)), Error);
  CHECK_THROWS_AS((void)conv1d_forward(tensor1({1, 2}), make_conv({1, 1, 1}, 1, 1, 3, {0}, 1)), Error);
}
