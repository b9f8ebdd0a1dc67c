#include "tsal/ops.hpp"

#include <algorithm>
#include <cmath>

#include "tsal/error.hpp"
#include "tsal/parallel.hpp"
#include "tsal/simd/kernels.hpp"

namespace tsal {

Conv2dParams Conv2dParams::zeros(std::size_t out_channels, std::size_t in_channels,
                                 std::size_t kernel, std::size_t padding) {
  return Conv2dParams{Tensor4::zeros({out_channels, in_channels, kernel, kernel}),
                      std::vector<double>(out_channels, 0.0), padding};
}

namespace {

void validate_params(const Conv2dParams& p) {
  if (p.kernel_h() % 2 == 0 || p.kernel_w() % 2 == 0) {
    throw Error(Errc::InvalidArgument, "conv2d: kernel extent must be odd, got " +
                                           std::to_string(p.kernel_h()) + "x" +
                                           std::to_string(p.kernel_w()));
  }
  if (p.bias.size() != p.out_channels()) {
    throw Error(Errc::DimensionMismatch, "conv2d: bias length " + std::to_string(p.bias.size()) +
                                             " != out_channels " +
                                             std::to_string(p.out_channels()));
  }
}

// Range of output columns x for which x + kx - pad falls inside [0, in_w).
struct ColumnSpan {
  std::size_t begin;
  std::size_t end;
};

ColumnSpan valid_columns(std::size_t kx, std::size_t pad, std::size_t in_w, std::size_t out_w) {
  const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kx) - static_cast<std::ptrdiff_t>(pad);
  const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
  const std::ptrdiff_t hi =
      std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(out_w),
                               static_cast<std::ptrdiff_t>(in_w) - shift);
  if (hi <= lo) return {0, 0};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// Input row index for output row y and kernel row ky, or -1 when it lands in
// the zero padding.
std::ptrdiff_t input_row(std::size_t y, std::size_t ky, std::size_t pad, std::size_t in_h) {
  const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) - static_cast<std::ptrdiff_t>(pad);
  return (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in_h)) ? -1 : iy;
}

}  // namespace

Shape4 conv2d_output_shape(const Shape4& input, const Conv2dParams& params) {
  validate_params(params);
  if (input.channels != params.in_channels()) {
    throw Error(Errc::DimensionMismatch, "conv2d: input has " + std::to_string(input.channels) +
                                             " channels, kernel expects " +
                                             std::to_string(params.in_channels()));
  }
  const std::size_t padded_h = input.height + 2 * params.padding;
  const std::size_t padded_w = input.width + 2 * params.padding;
  if (padded_h < params.kernel_h() || padded_w < params.kernel_w()) {
    throw Error(Errc::DimensionMismatch, "conv2d: padded input " + std::to_string(padded_h) + "x" +
                                             std::to_string(padded_w) +
                                             " smaller than kernel");
  }
  return {input.batch, params.out_channels(), padded_h - params.kernel_h() + 1,
          padded_w - params.kernel_w() + 1};
}

Tensor4 conv2d_forward(const Tensor4& input, const Conv2dParams& params) {
  const Shape4 out_shape = conv2d_output_shape(input.shape(), params);
  Tensor4 out(out_shape);
  const auto& k = simd::kernels();
  const std::size_t in_c = params.in_channels();
  const std::size_t kh = params.kernel_h();
  const std::size_t kw = params.kernel_w();
  const std::size_t pad = params.padding;
  const std::size_t in_h = input.height();
  const std::size_t in_w = input.width();
  const std::size_t out_h = out_shape.height;
  const std::size_t out_w = out_shape.width;
  const std::size_t work = in_c * kh * kw * out_shape.plane();

  for (std::size_t n = 0; n < out_shape.batch; ++n) {
    parallel_for(out_shape.channels, work, [&](std::size_t o) {
      std::span<double> dst = out.plane(n, o);
      std::fill(dst.begin(), dst.end(), params.bias[o]);
      for (std::size_t c = 0; c < in_c; ++c) {
        const double* src = input.plane(n, c).data();
        for (std::size_t ky = 0; ky < kh; ++ky) {
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const double w = params.weights.at(o, c, ky, kx);
            const ColumnSpan cols = valid_columns(kx, pad, in_w, out_w);
            if (cols.end == cols.begin) continue;
            const std::size_t src_col = cols.begin + kx - pad;
            for (std::size_t y = 0; y < out_h; ++y) {
              const std::ptrdiff_t iy = input_row(y, ky, pad, in_h);
              if (iy < 0) continue;
              k.axpy(w, src + static_cast<std::size_t>(iy) * in_w + src_col,
                     dst.data() + y * out_w + cols.begin, cols.end - cols.begin);
            }
          }
        }
      }
    });
  }
  out.require_finite("conv2d_forward");
  return out;
}

Conv2dGrads conv2d_backward(const Tensor4& input, const Conv2dParams& params,
                            const Tensor4& grad_out) {
  const Shape4 out_shape = conv2d_output_shape(input.shape(), params);
  require_same_shape(grad_out.shape(), out_shape, "conv2d_backward grad_out");

  const auto& k = simd::kernels();
  const std::size_t in_c = params.in_channels();
  const std::size_t out_c = params.out_channels();
  const std::size_t kh = params.kernel_h();
  const std::size_t kw = params.kernel_w();
  const std::size_t pad = params.padding;
  const std::size_t in_h = input.height();
  const std::size_t in_w = input.width();
  const std::size_t out_h = out_shape.height;
  const std::size_t out_w = out_shape.width;
  const std::size_t work = out_c * kh * kw * out_shape.plane();

  Conv2dGrads g{Tensor4(input.shape()), Tensor4(params.weights.shape()),
                std::vector<double>(out_c, 0.0)};

  // dL/dx: each worker owns one input channel and walks output channels in
  // order, so accumulation order is fixed.
  for (std::size_t n = 0; n < input.batch(); ++n) {
    parallel_for(in_c, work, [&](std::size_t c) {
      double* dst = g.input.plane(n, c).data();
      for (std::size_t o = 0; o < out_c; ++o) {
        const double* go = grad_out.plane(n, o).data();
        for (std::size_t ky = 0; ky < kh; ++ky) {
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const double w = params.weights.at(o, c, ky, kx);
            const ColumnSpan cols = valid_columns(kx, pad, in_w, out_w);
            if (cols.end == cols.begin) continue;
            const std::size_t dst_col = cols.begin + kx - pad;
            for (std::size_t y = 0; y < out_h; ++y) {
              const std::ptrdiff_t iy = input_row(y, ky, pad, in_h);
              if (iy < 0) continue;
              k.axpy(w, go + y * out_w + cols.begin,
                     dst + static_cast<std::size_t>(iy) * in_w + dst_col, cols.end - cols.begin);
            }
          }
        }
      }
    });
  }

  // dL/dW and dL/db: one worker per output channel.
  parallel_for(out_c, in_c * work / std::max<std::size_t>(1, out_c), [&](std::size_t o) {
    double bias_acc = 0.0;
    for (std::size_t n = 0; n < input.batch(); ++n) {
      const std::span<const double> go_plane = grad_out.plane(n, o);
      bias_acc += k.sum(go_plane.data(), go_plane.size());
    }
    g.bias[o] = bias_acc;
    for (std::size_t c = 0; c < in_c; ++c) {
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const ColumnSpan cols = valid_columns(kx, pad, in_w, out_w);
          double acc = 0.0;
          if (cols.end > cols.begin) {
            const std::size_t src_col = cols.begin + kx - pad;
            for (std::size_t n = 0; n < input.batch(); ++n) {
              const double* go = grad_out.plane(n, o).data();
              const double* src = input.plane(n, c).data();
              for (std::size_t y = 0; y < out_h; ++y) {
                const std::ptrdiff_t iy = input_row(y, ky, pad, in_h);
                if (iy < 0) continue;
                acc += k.dot(go + y * out_w + cols.begin,
                             src + static_cast<std::size_t>(iy) * in_w + src_col,
                             cols.end - cols.begin);
              }
            }
          }
          g.weights.at(o, c, ky, kx) = acc;
        }
      }
    }
  });

  g.input.require_finite("conv2d_backward input gradient");
  g.weights.require_finite("conv2d_backward weight gradient");
  for (double b : g.bias) {
    if (!std::isfinite(b)) throw Error(Errc::NonFinite, "conv2d_backward: non-finite bias gradient");
  }
  return g;
}

double sigmoid_scalar(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

template <typename F>
Tensor4 map_unary(const Tensor4& in, const char* what, F f) {
  Tensor4 out(in.shape());
  auto src = in.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  out.require_finite(what);
  return out;
}

template <typename F>
Tensor4 map_binary(const Tensor4& a, const Tensor4& b, const char* what, F f) {
  require_same_shape(a.shape(), b.shape(), what);
  Tensor4 out(a.shape());
  auto x = a.data();
  auto y = b.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) dst[i] = f(x[i], y[i]);
  out.require_finite(what);
  return out;
}

}  // namespace

Tensor4 sigmoid(const Tensor4& input) { return map_unary(input, "sigmoid", sigmoid_scalar); }

Tensor4 tanh_act(const Tensor4& input) {
  return map_unary(input, "tanh", [](double v) { return std::tanh(v); });
}

Tensor4 relu(const Tensor4& input) {
  return map_unary(input, "relu", [](double v) { return v > 0.0 ? v : 0.0; });
}

Tensor4 sigmoid_backward(const Tensor4& input, const Tensor4& grad_out) {
  return map_binary(input, grad_out, "sigmoid_backward", [](double x, double g) {
    const double s = sigmoid_scalar(x);
    return g * (s * (1.0 - s));
  });
}

Tensor4 tanh_backward(const Tensor4& input, const Tensor4& grad_out) {
  return map_binary(input, grad_out, "tanh_backward", [](double x, double g) {
    const double t = std::tanh(x);
    return g * (1.0 - t * t);
  });
}

Tensor4 relu_backward(const Tensor4& input, const Tensor4& grad_out) {
  return map_binary(input, grad_out, "relu_backward",
                    [](double x, double g) { return x > 0.0 ? g : 0.0; });
}

Tensor4 sigmoid_backward_from_output(const Tensor4& output, const Tensor4& grad_out) {
  return map_binary(output, grad_out, "sigmoid_backward",
                    [](double s, double g) { return g * (s * (1.0 - s)); });
}

Tensor4 tanh_backward_from_output(const Tensor4& output, const Tensor4& grad_out) {
  return map_binary(output, grad_out, "tanh_backward",
                    [](double t, double g) { return g * (1.0 - t * t); });
}

Tensor4 add(const Tensor4& a, const Tensor4& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor4 out(a.shape());
  simd::kernels().add(a.data().data(), b.data().data(), out.data().data(), out.size());
  out.require_finite("add");
  return out;
}

Tensor4 mul(const Tensor4& a, const Tensor4& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor4 out(a.shape());
  simd::kernels().mul(a.data().data(), b.data().data(), out.data().data(), out.size());
  out.require_finite("mul");
  return out;
}

Tensor4 scale(const Tensor4& a, double s) {
  Tensor4 out(a.shape());
  simd::kernels().scale(a.data().data(), s, out.data().data(), out.size());
  out.require_finite("scale");
  return out;
}

void add_inplace(Tensor4& a, const Tensor4& b) {
  require_same_shape(a.shape(), b.shape(), "add_inplace");
  simd::kernels().add(a.data().data(), b.data().data(), a.data().data(), a.size());
  a.require_finite("add_inplace");
}

}  // namespace tsal
