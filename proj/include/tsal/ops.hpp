#pragma once

#include <cstddef>
#include <vector>

#include "tsal/tensor.hpp"

namespace tsal {

/// Weights (out x in x kh x kw), one bias per output channel, symmetric zero
/// padding. Stride is always 1.
struct Conv2dParams {
  Tensor4 weights;
  std::vector<double> bias;
  std::size_t padding = 1;

  static Conv2dParams zeros(std::size_t out_channels, std::size_t in_channels, std::size_t kernel,
                            std::size_t padding);

  std::size_t out_channels() const noexcept { return weights.batch(); }
  std::size_t in_channels() const noexcept { return weights.channels(); }
  std::size_t kernel_h() const noexcept { return weights.height(); }
  std::size_t kernel_w() const noexcept { return weights.width(); }
};

struct Conv2dGrads {
  Tensor4 input;
  Tensor4 weights;
  std::vector<double> bias;
};

/// Output spatial extent H + 2p - kh + 1 (equal to H for 3x3 / padding 1).
Shape4 conv2d_output_shape(const Shape4& input, const Conv2dParams& params);

Tensor4 conv2d_forward(const Tensor4& input, const Conv2dParams& params);

Conv2dGrads conv2d_backward(const Tensor4& input, const Conv2dParams& params,
                            const Tensor4& grad_out);

Tensor4 sigmoid(const Tensor4& input);
Tensor4 tanh_act(const Tensor4& input);
Tensor4 relu(const Tensor4& input);

// Backward passes taking the forward *input* x.
Tensor4 sigmoid_backward(const Tensor4& input, const Tensor4& grad_out);
Tensor4 tanh_backward(const Tensor4& input, const Tensor4& grad_out);
Tensor4 relu_backward(const Tensor4& input, const Tensor4& grad_out);

// Same derivatives expressed through the forward *output* y, which the
// network layers cache instead of recomputing the nonlinearity.
Tensor4 sigmoid_backward_from_output(const Tensor4& output, const Tensor4& grad_out);
Tensor4 tanh_backward_from_output(const Tensor4& output, const Tensor4& grad_out);

Tensor4 add(const Tensor4& a, const Tensor4& b);
Tensor4 mul(const Tensor4& a, const Tensor4& b);
Tensor4 scale(const Tensor4& a, double s);

/// a += b, in place.
void add_inplace(Tensor4& a, const Tensor4& b);

/// Numerically stable logistic function.
double sigmoid_scalar(double x) noexcept;

}  // namespace tsal
