// Test-only helpers: seeded generators and independent oracles. Nothing here
// calls into the library's convolution or metric code paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "tsal/metrics.hpp"
#include "tsal/tensor.hpp"

namespace tsal::test {

inline Tensor4 random_tensor(Shape4 shape, std::mt19937_64& rng, double lo = -1.0,
                             double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor4 t(shape);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double lo = -1.0,
                                         double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

/// Straightforward zero-padded stride-1 cross-correlation, one output element
/// at a time with explicit bounds checks.
inline Tensor4 naive_conv2d(const Tensor4& input, const Tensor4& weights,
                            const std::vector<double>& bias, std::size_t pad) {
  const auto in = input.shape();
  const auto ws = weights.shape();
  const std::size_t out_h = in.height + 2 * pad - ws.height + 1;
  const std::size_t out_w = in.width + 2 * pad - ws.width + 1;
  Tensor4 out({in.batch, ws.batch, out_h, out_w});
  for (std::size_t n = 0; n < in.batch; ++n)
    for (std::size_t o = 0; o < ws.batch; ++o)
      for (std::size_t y = 0; y < out_h; ++y)
        for (std::size_t x = 0; x < out_w; ++x) {
          double acc = bias[o];
          for (std::size_t c = 0; c < in.channels; ++c)
            for (std::size_t ky = 0; ky < ws.height; ++ky)
              for (std::size_t kx = 0; kx < ws.width; ++kx) {
                const long iy = static_cast<long>(y + ky) - static_cast<long>(pad);
                const long ix = static_cast<long>(x + kx) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(in.height) ||
                    ix >= static_cast<long>(in.width))
                  continue;
                acc += weights.at(o, c, ky, kx) * input.at(n, c, static_cast<std::size_t>(iy),
                                                           static_cast<std::size_t>(ix));
              }
          out.at(n, o, y, x) = acc;
        }
  return out;
}

/// Central finite difference of `loss` with respect to every entry of
/// `params` (perturbed in place and restored).
inline std::vector<double> finite_difference(std::span<double> params,
                                             const std::function<double()>& loss,
                                             double step = 1e-6) {
  std::vector<double> grad(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + step;
    const double up = loss();
    params[i] = saved - step;
    const double down = loss();
    params[i] = saved;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

/// |a-b| relative to the larger magnitude, with an absolute floor so that
/// gradients that are zero up to roundoff compare as equal.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                                 double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i)
    worst = std::max(worst, relative_error(analytic[i], numeric[i], floor));
  return worst;
}

inline double weighted_sum(const Tensor4& t, const Tensor4& weights) {
  double acc = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) acc += t.data()[i] * weights.data()[i];
  return acc;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

/// Brute-force Mann-Whitney: fraction of (positive, negative) pairs ranked
/// correctly, ties counting one half.
inline double mann_whitney_auc(std::span<const double> pos, std::span<const double> neg) {
  double wins = 0.0;
  for (double p : pos)
    for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

/// Pearson correlation straight from the textbook two-pass formula, plain
/// loops only.
inline double pearson_direct(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

/// Map of size <= max_side x max_side whose values are pairwise distinct and
/// separated by at least 0.5/N (a shuffled ladder plus jitter), in (0, 1].
inline SaliencyMap random_tie_free_map(std::mt19937_64& rng, std::size_t max_side = 8,
                                       std::size_t min_pixels = 2) {
  std::uniform_int_distribution<std::size_t> side(1, max_side);
  std::size_t h, w;
  do {
    h = side(rng);
    w = side(rng);
  } while (h * w < min_pixels);
  const std::size_t n = h * w;
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) rank[i] = i;
  std::shuffle(rank.begin(), rank.end(), rng);
  std::uniform_real_distribution<double> jitter(0.0, 0.5);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = (static_cast<double>(rank[i]) + 0.25 + jitter(rng)) / static_cast<double>(n);
  return SaliencyMap(h, w, std::move(v));
}

inline SaliencyMap random_map(std::mt19937_64& rng, std::size_t h, std::size_t w) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(h * w);
  for (double& x : v) x = dist(rng);
  return SaliencyMap(h, w, std::move(v));
}

/// Up to max_count fixations at distinct pixels, always leaving at least one
/// pixel unfixated.
inline FixationSet random_fixations(const SaliencyMap& map, std::mt19937_64& rng,
                                    std::size_t max_count = 10) {
  const std::size_t n = map.size();
  const std::size_t limit = std::min(max_count, n - 1);
  std::uniform_int_distribution<std::size_t> count(1, limit);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  FixationSet fix;
  const std::size_t k = count(rng);
  for (std::size_t i = 0; i < k; ++i) fix.points.push_back({idx[i] / map.width(), idx[i] % map.width()});
  return fix;
}

/// Any points in bounds, duplicates allowed.
inline FixationSet random_points(const SaliencyMap& map, std::mt19937_64& rng, std::size_t count) {
  std::uniform_int_distribution<std::size_t> row(0, map.height() - 1), col(0, map.width() - 1);
  FixationSet fix;
  for (std::size_t i = 0; i < count; ++i) fix.points.push_back({row(rng), col(rng)});
  return fix;
}

inline std::vector<double> values_at(const SaliencyMap& map, const FixationSet& fix) {
  std::vector<double> out;
  for (const auto& p : fix.points) out.push_back(map.at(p.row, p.col));
  return out;
}

inline std::vector<double> unfixated_values(const SaliencyMap& map, const FixationSet& fix) {
  std::vector<bool> hit(map.size(), false);
  for (const auto& p : fix.points) hit[p.row * map.width() + p.col] = true;
  std::vector<double> out;
  for (std::size_t i = 0; i < map.size(); ++i)
    if (!hit[i]) out.push_back(map.values()[i]);
  return out;
}

template <typename F>
SaliencyMap transform_map(const SaliencyMap& map, F f) {
  std::vector<double> v(map.values().begin(), map.values().end());
  for (double& x : v) x = f(x);
  return SaliencyMap(map.height(), map.width(), std::move(v));
}

}  // namespace tsal::test
