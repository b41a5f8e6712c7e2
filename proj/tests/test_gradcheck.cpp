#include <doctest.h>

#include "dhrn/gradcheck.hpp"

using namespace dhrn;

TEST_CASE("every backward pass agrees with central finite differences") {
  GradCheckOptions opt;
  opt.seed = 2024;
  const auto results = run_gradcheck_suite(opt);
  for (const auto& r : results) {
    INFO(r.name, " max relative error ", r.max_rel_err);
    CHECK(r.ok);
  }
}

TEST_CASE("the harness catches a sign-flipped conv weight gradient") {
  GradCheckOptions opt;
  opt.seed = 2024;
  opt.flip_conv_weight_grad = true;
  const auto r = check_conv1d(opt);
  CHECK_FALSE(r.ok);
}
