#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "support.hpp"
#include "tsal/error.hpp"
#include "tsal/ops.hpp"
#include "tsal/simd/kernels.hpp"

using namespace tsal;
using simd::Isa;

namespace {

std::vector<Isa> vector_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::Avx2, Isa::Neon})
    if (simd::isa_available(isa)) out.push_back(isa);
  return out;
}

}  // namespace

TEST_CASE("isa names round-trip and unavailable variants are refused") {
  for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon}) CHECK(simd::parse_isa(simd::isa_name(isa)) == isa);
  CHECK_FALSE(simd::parse_isa("sse9").has_value());
  CHECK(simd::isa_available(Isa::Scalar));
  for (Isa isa : {Isa::Avx2, Isa::Neon}) {
    if (!simd::isa_available(isa)) CHECK_THROWS_AS(simd::select_isa(isa), Error);
  }
  {
    simd::ScopedIsa scoped(Isa::Scalar);
    CHECK(simd::active_isa() == Isa::Scalar);
  }
  MESSAGE("active SIMD variant: " << simd::isa_name(simd::active_isa()));
}

TEST_CASE("vector kernels match the scalar reference") {
  const auto& ref = *simd::table_for(Isa::Scalar);
  std::mt19937_64 rng(11);
  for (Isa isa : vector_isas()) {
    CAPTURE(simd::isa_name(isa));
    const auto& vec = *simd::table_for(isa);
    for (std::size_t n = 0; n < 70; ++n) {
      auto x = test::random_vector(n, rng, -3.0, 3.0);
      auto y = test::random_vector(n, rng, -3.0, 3.0);
      const double a = test::random_vector(1, rng)[0];

      auto y_ref = y, y_vec = y;
      ref.axpy(a, x.data(), y_ref.data(), n);
      vec.axpy(a, x.data(), y_vec.data(), n);
      CHECK(y_ref == y_vec);

      std::vector<double> o_ref(n), o_vec(n);
      ref.add(x.data(), y.data(), o_ref.data(), n);
      vec.add(x.data(), y.data(), o_vec.data(), n);
      CHECK(o_ref == o_vec);
      ref.mul(x.data(), y.data(), o_ref.data(), n);
      vec.mul(x.data(), y.data(), o_vec.data(), n);
      CHECK(o_ref == o_vec);
      ref.scale(x.data(), a, o_ref.data(), n);
      vec.scale(x.data(), a, o_vec.data(), n);
      CHECK(o_ref == o_vec);

      double mag_dot = 0.0, mag_sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        mag_dot += std::abs(x[i] * y[i]);
        mag_sum += std::abs(x[i]);
      }
      CHECK(std::abs(ref.dot(x.data(), y.data(), n) - vec.dot(x.data(), y.data(), n)) <=
            1e-12 * std::max(1.0, mag_dot));
      CHECK(std::abs(ref.sum(x.data(), n) - vec.sum(x.data(), n)) <= 1e-12 * std::max(1.0, mag_sum));
    }
  }
}

TEST_CASE("convolution is equivalent across SIMD variants") {
  std::mt19937_64 rng(12);
  for (Isa isa : vector_isas()) {
    CAPTURE(simd::isa_name(isa));
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t h = 3 + static_cast<std::size_t>(trial) % 9;
      const std::size_t w = 3 + static_cast<std::size_t>(trial * 7) % 13;
      Tensor4 x = test::random_tensor({1, 3, h, w}, rng);
      Conv2dParams p{test::random_tensor({5, 3, 3, 3}, rng), test::random_vector(5, rng), 1};
      Tensor4 g = test::random_tensor({1, 5, h, w}, rng);

      Tensor4 y_ref = [&] {
        simd::ScopedIsa s(Isa::Scalar);
        return conv2d_forward(x, p);
      }();
      Conv2dGrads g_ref = [&] {
        simd::ScopedIsa s(Isa::Scalar);
        return conv2d_backward(x, p, g);
      }();
      simd::ScopedIsa s(isa);
      Tensor4 y_vec = conv2d_forward(x, p);
      Conv2dGrads g_vec = conv2d_backward(x, p, g);

      // Row-axpy paths keep the reference accumulation order exactly.
      CHECK(test::max_abs_diff(y_ref.data(), y_vec.data()) == 0.0);
      CHECK(test::max_abs_diff(g_ref.input.data(), g_vec.input.data()) == 0.0);
      // Reductions only reassociate.
      CHECK(test::max_abs_diff(g_ref.weights.data(), g_vec.weights.data()) <= 1e-12);
      CHECK(test::max_abs_diff(g_ref.bias, g_vec.bias) <= 1e-12);
    }
  }
}
