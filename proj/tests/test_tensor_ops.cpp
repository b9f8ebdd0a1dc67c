#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "support.hpp"
#include "tsal/error.hpp"
#include "tsal/ops.hpp"
#include "tsal/parallel.hpp"

using namespace tsal;
using tsal::test::finite_difference;
using tsal::test::max_relative_error;
using tsal::test::naive_conv2d;
using tsal::test::random_tensor;
using tsal::test::weighted_sum;

namespace {

Conv2dParams identity_kernel() {
  Conv2dParams p = Conv2dParams::zeros(1, 1, 3, 1);
  p.weights.at(0, 0, 1, 1) = 1.0;
  return p;
}

Errc error_code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected tsal::Error");
  return Errc::InvalidArgument;
}

}  // namespace

TEST_CASE("Tensor4 rejects zero dims and wrong data length") {
  CHECK(error_code_of([] { Tensor4({1, 0, 2, 2}); }) == Errc::InvalidArgument);
  CHECK(error_code_of([] { Tensor4({1, 1, 2, 2}, std::vector<double>(3)); }) ==
        Errc::DimensionMismatch);
  Tensor4 t({2, 3, 4, 5});
  CHECK(t.size() == 120);
  CHECK(t.offset(1, 2, 3, 4) == 119);
}

TEST_CASE("conv2d_forward examples") {
  std::mt19937_64 rng(1);

  SUBCASE("identity kernel is an exact fixpoint") {
    Tensor4 x = random_tensor({1, 1, 3, 3}, rng);
    Tensor4 y = conv2d_forward(x, identity_kernel());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == x.data()[i]);
  }

  SUBCASE("all-ones kernel over a 2x2 input") {
    Tensor4 x({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
    Conv2dParams p = Conv2dParams::zeros(1, 1, 3, 1);
    for (double& w : p.weights.data()) w = 1.0;
    Tensor4 y = conv2d_forward(x, p);
    for (double v : y.data()) CHECK(v == 10.0);
  }

  SUBCASE("zero kernel yields the bias everywhere") {
    Tensor4 x = random_tensor({2, 3, 5, 4}, rng);
    Conv2dParams p = Conv2dParams::zeros(2, 3, 3, 1);
    p.bias = {0.75, -1.5};
    Tensor4 y = conv2d_forward(x, p);
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t yy = 0; yy < 5; ++yy)
        for (std::size_t xx = 0; xx < 4; ++xx) {
          CHECK(y.at(n, 0, yy, xx) == 0.75);
          CHECK(y.at(n, 1, yy, xx) == -1.5);
        }
  }
}

TEST_CASE("conv2d_forward errors") {
  Tensor4 x({1, 2, 4, 4});
  CHECK(error_code_of([&] { conv2d_forward(x, Conv2dParams::zeros(1, 3, 3, 1)); }) ==
        Errc::DimensionMismatch);
  Conv2dParams bad_bias = Conv2dParams::zeros(2, 2, 3, 1);
  bad_bias.bias.pop_back();
  CHECK(error_code_of([&] { conv2d_forward(x, bad_bias); }) == Errc::DimensionMismatch);
  CHECK(error_code_of([&] { conv2d_forward(Tensor4({1, 1, 1, 1}), Conv2dParams::zeros(1, 1, 5, 1)); }) ==
        Errc::DimensionMismatch);

  Tensor4 huge({1, 1, 3, 3}, std::numeric_limits<double>::max());
  Conv2dParams p = Conv2dParams::zeros(1, 1, 3, 1);
  for (double& w : p.weights.data()) w = 1.0;
  CHECK(error_code_of([&] { conv2d_forward(huge, p); }) == Errc::NonFinite);
}

TEST_CASE("conv2d_forward matches the naive oracle for odd kernels and paddings") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t kernel = 1 + 2 * (trial % 3);
    const std::size_t pad = static_cast<std::size_t>(trial % 4) % (kernel / 2 + 1);
    const std::size_t h = kernel + static_cast<std::size_t>(trial % 5);
    const std::size_t w = kernel + static_cast<std::size_t>((trial / 5) % 7);
    const auto t = static_cast<std::size_t>(trial);
    Tensor4 x = random_tensor({1 + t % 2, 1 + t % 3, h, w}, rng);
    Conv2dParams p{random_tensor({2, x.channels(), kernel, kernel}, rng),
                   tsal::test::random_vector(2, rng), pad};
    Tensor4 got = conv2d_forward(x, p);
    Tensor4 want = naive_conv2d(x, p.weights, p.bias, pad);
    REQUIRE(got.shape() == want.shape());
    CHECK(tsal::test::max_abs_diff(got.data(), want.data()) <= 1e-12);
  }
}

TEST_CASE("conv2d_forward is linear in its input") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor4 x = random_tensor({1, 3, 6, 5}, rng);
    Tensor4 y = random_tensor({1, 3, 6, 5}, rng);
    Conv2dParams p{random_tensor({4, 3, 3, 3}, rng), std::vector<double>(4, 0.0), 1};
    const double alpha = 1.7, beta = -0.6;
    Tensor4 lhs = conv2d_forward(add(scale(x, alpha), scale(y, beta)), p);
    Tensor4 rhs = add(scale(conv2d_forward(x, p), alpha), scale(conv2d_forward(y, p), beta));
    CHECK(tsal::test::max_abs_diff(lhs.data(), rhs.data()) <= 1e-12);
  }
}

TEST_CASE("conv2d_backward examples") {
  std::mt19937_64 rng(4);
  Tensor4 x = random_tensor({1, 1, 3, 3}, rng);

  SUBCASE("zero upstream gradient") {
    Conv2dParams p{random_tensor({2, 1, 3, 3}, rng), {0.1, 0.2}, 1};
    Conv2dGrads g = conv2d_backward(x, p, Tensor4({1, 2, 3, 3}));
    for (double v : g.input.data()) CHECK(v == 0.0);
    for (double v : g.weights.data()) CHECK(v == 0.0);
    for (double v : g.bias) CHECK(v == 0.0);
  }

  SUBCASE("identity kernel passes the gradient through") {
    Tensor4 grad = random_tensor({1, 1, 3, 3}, rng);
    Conv2dGrads g = conv2d_backward(x, identity_kernel(), grad);
    for (std::size_t i = 0; i < grad.size(); ++i) CHECK(g.input.data()[i] == grad.data()[i]);
  }

  SUBCASE("grad_out shape must match the forward output") {
    CHECK(error_code_of([&] { conv2d_backward(x, identity_kernel(), Tensor4({1, 1, 2, 3})); }) ==
          Errc::DimensionMismatch);
  }
}

TEST_CASE("conv2d_backward agrees with central finite differences") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto t = static_cast<std::size_t>(trial);
    const std::size_t c_in = 1 + t % 4;
    const std::size_t c_out = 1 + (t / 4) % 3;
    const std::size_t h = 3 + t % 4;
    const std::size_t w = 3 + (t / 3) % 4;
    Tensor4 x = random_tensor({1, c_in, h, w}, rng);
    Conv2dParams p{random_tensor({c_out, c_in, 3, 3}, rng), tsal::test::random_vector(c_out, rng),
                   1};
    Tensor4 r = random_tensor({1, c_out, h, w}, rng);
    auto loss = [&] { return weighted_sum(conv2d_forward(x, p), r); };
    Conv2dGrads g = conv2d_backward(x, p, r);

    CHECK(max_relative_error(g.input.data(), finite_difference(x.data(), loss)) < 1e-5);
    CHECK(max_relative_error(g.weights.data(), finite_difference(p.weights.data(), loss)) < 1e-5);
    CHECK(max_relative_error(g.bias, finite_difference(p.bias, loss)) < 1e-5);
  }
}

TEST_CASE("activations") {
  Tensor4 zero({1, 2, 3, 3});
  const Tensor4 s0 = sigmoid(zero);
  const Tensor4 t0 = tanh_act(zero);
  for (double v : s0.data()) CHECK(v == 0.5);
  for (double v : t0.data()) CHECK(v == 0.0);

  std::mt19937_64 rng(6);
  Tensor4 g = random_tensor(zero.shape(), rng);
  Tensor4 ds = sigmoid_backward(zero, g);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(ds.data()[i] == doctest::Approx(0.25 * g.data()[i]).epsilon(1e-15));

  SUBCASE("sigmoid is stable at large magnitudes") {
    Tensor4 x({1, 1, 1, 2}, std::vector<double>{-800.0, 800.0});
    Tensor4 s = sigmoid(x);
    CHECK(s.data()[0] == 0.0);
    CHECK(s.data()[1] == 1.0);
  }

  SUBCASE("non-finite input is rejected") {
    Tensor4 x({1, 1, 1, 1}, std::numeric_limits<double>::quiet_NaN());
    CHECK(error_code_of([&] { sigmoid(x); }) == Errc::NonFinite);
    CHECK(error_code_of([&] { tanh_act(x); }) == Errc::NonFinite);
  }
}

TEST_CASE("activation gradients agree with finite differences") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const auto t = static_cast<std::size_t>(trial);
    Tensor4 x = random_tensor({1, 1 + t % 4, 2 + t % 5, 2 + t % 5}, rng, -3.0, 3.0);
    // Upstream weights bounded away from zero keep the finite-difference
    // roundoff small relative to the gradient.
    Tensor4 r = random_tensor(x.shape(), rng, 0.5, 1.0);
    for (std::size_t i = 0; i < r.size(); i += 2) r.data()[i] = -r.data()[i];
    CHECK(max_relative_error(sigmoid_backward(x, r).data(),
                             finite_difference(x.data(), [&] { return weighted_sum(sigmoid(x), r); })) <
          1e-5);
    CHECK(max_relative_error(tanh_backward(x, r).data(),
                             finite_difference(x.data(), [&] { return weighted_sum(tanh_act(x), r); })) <
          1e-5);
    // ReLU is checked away from its kink.
    for (double& v : x.data())
      if (std::abs(v) < 1e-3) v = 0.5;
    CHECK(max_relative_error(relu_backward(x, r).data(),
                             finite_difference(x.data(), [&] { return weighted_sum(relu(x), r); })) <
          1e-5);

    Tensor4 sx = sigmoid(x);
    Tensor4 tx = tanh_act(x);
    CHECK(tsal::test::max_abs_diff(sigmoid_backward_from_output(sx, r).data(),
                                   sigmoid_backward(x, r).data()) < 1e-15);
    CHECK(tsal::test::max_abs_diff(tanh_backward_from_output(tx, r).data(),
                                   tanh_backward(x, r).data()) < 1e-15);
  }
}

TEST_CASE("elementwise ops") {
  std::mt19937_64 rng(8);
  Tensor4 x = random_tensor({1, 2, 3, 5}, rng);
  Tensor4 y = random_tensor(x.shape(), rng);

  Tensor4 sum0 = add(x, Tensor4::zeros(x.shape()));
  Tensor4 prod1 = mul(x, Tensor4::ones(x.shape()));
  Tensor4 zeroed = scale(x, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(sum0.data()[i] == x.data()[i]);
    CHECK(prod1.data()[i] == x.data()[i]);
    CHECK(zeroed.data()[i] == 0.0);
  }
  Tensor4 xy = add(x, y), yx = add(y, x);
  Tensor4 mxy = mul(x, y), myx = mul(y, x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(xy.data()[i] == yx.data()[i]);
    CHECK(mxy.data()[i] == myx.data()[i]);
  }
  CHECK(error_code_of([&] { add(x, Tensor4({1, 2, 3, 4})); }) == Errc::DimensionMismatch);
  CHECK(error_code_of([&] { mul(x, Tensor4({1, 1, 3, 5})); }) == Errc::DimensionMismatch);

  // Linear ops: the finite-difference check is exact up to roundoff.
  Tensor4 r = random_tensor(x.shape(), rng);
  Tensor4 dmul = mul(r, y);
  CHECK(max_relative_error(dmul.data(),
                           finite_difference(x.data(), [&] { return weighted_sum(mul(x, y), r); })) <
        1e-5);
}

TEST_CASE("convolution results do not depend on the worker count") {
  std::mt19937_64 rng(9);
  Tensor4 x = random_tensor({1, 16, 24, 24}, rng);
  Conv2dParams p{random_tensor({16, 16, 3, 3}, rng), tsal::test::random_vector(16, rng), 1};
  Tensor4 grad = random_tensor({1, 16, 24, 24}, rng);
  const std::size_t saved = num_threads();

  set_num_threads(1);
  Tensor4 y1 = conv2d_forward(x, p);
  Conv2dGrads g1 = conv2d_backward(x, p, grad);
  set_num_threads(4);
  Tensor4 y4 = conv2d_forward(x, p);
  Conv2dGrads g4 = conv2d_backward(x, p, grad);
  set_num_threads(saved);

  CHECK(tsal::test::max_abs_diff(y1.data(), y4.data()) == 0.0);
  CHECK(tsal::test::max_abs_diff(g1.input.data(), g4.input.data()) == 0.0);
  CHECK(tsal::test::max_abs_diff(g1.weights.data(), g4.weights.data()) == 0.0);
  CHECK(tsal::test::max_abs_diff(g1.bias, g4.bias) == 0.0);
}
