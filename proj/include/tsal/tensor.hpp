#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tsal {

/// Extent of a rank-4 tensor: batch x channels x height x width.
struct Shape4 {
  std::size_t batch = 1;
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t numel() const noexcept { return batch * channels * height * width; }
  std::size_t plane() const noexcept { return height * width; }

  friend bool operator==(const Shape4&, const Shape4&) = default;
};

std::string to_string(const Shape4& shape);

/// Dense rank-4 array of doubles, row-major with batch outermost and width
/// innermost. All dims are >= 1 and every element is finite once a public
/// operation returns.
class Tensor4 {
 public:
  Tensor4() : Tensor4(Shape4{}) {}
  explicit Tensor4(Shape4 shape, double fill = 0.0);
  Tensor4(Shape4 shape, std::vector<double> data);

  static Tensor4 zeros(Shape4 shape) { return Tensor4(shape, 0.0); }
  static Tensor4 ones(Shape4 shape) { return Tensor4(shape, 1.0); }

  const Shape4& shape() const noexcept { return shape_; }
  std::size_t batch() const noexcept { return shape_.batch; }
  std::size_t channels() const noexcept { return shape_.channels; }
  std::size_t height() const noexcept { return shape_.height; }
  std::size_t width() const noexcept { return shape_.width; }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return ((n * shape_.channels + c) * shape_.height + y) * shape_.width + x;
  }
  double& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) noexcept {
    return data_[offset(n, c, y, x)];
  }
  double at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data_[offset(n, c, y, x)];
  }

  /// Contiguous H*W plane of (n, c).
  std::span<double> plane(std::size_t n, std::size_t c) noexcept {
    return std::span<double>(data_).subspan(offset(n, c, 0, 0), shape_.plane());
  }
  std::span<const double> plane(std::size_t n, std::size_t c) const noexcept {
    return std::span<const double>(data_).subspan(offset(n, c, 0, 0), shape_.plane());
  }

  bool all_finite() const noexcept;

  /// Throws Errc::NonFinite naming `what` if any element is NaN or Inf.
  void require_finite(const char* what) const;

 private:
  Shape4 shape_;
  std::vector<double> data_;
};

/// Throws Errc::DimensionMismatch unless the two shapes agree.
void require_same_shape(const Shape4& a, const Shape4& b, const char* what);

}  // namespace tsal
