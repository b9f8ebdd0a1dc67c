#include "tsal/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "tsal/error.hpp"

namespace tsal {

std::string to_string(const Shape4& s) {
  return std::to_string(s.batch) + "x" + std::to_string(s.channels) + "x" +
         std::to_string(s.height) + "x" + std::to_string(s.width);
}

namespace {

void validate_dims(const Shape4& shape) {
  if (shape.batch == 0 || shape.channels == 0 || shape.height == 0 || shape.width == 0) {
    throw Error(Errc::InvalidArgument, "tensor dims must be >= 1, got " + to_string(shape));
  }
}

}  // namespace

Tensor4::Tensor4(Shape4 shape, double fill) : shape_(shape) {
  validate_dims(shape_);
  data_.assign(shape_.numel(), fill);
}

Tensor4::Tensor4(Shape4 shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  validate_dims(shape_);
  if (data_.size() != shape_.numel()) {
    throw Error(Errc::DimensionMismatch,
                "tensor of shape " + to_string(shape_) + " needs " + std::to_string(shape_.numel()) +
                    " elements, got " + std::to_string(data_.size()));
  }
}

bool Tensor4::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor4::require_finite(const char* what) const {
  if (!all_finite()) {
    throw Error(Errc::NonFinite, std::string(what) + ": non-finite value in result");
  }
}

void require_same_shape(const Shape4& a, const Shape4& b, const char* what) {
  if (!(a == b)) {
    throw Error(Errc::DimensionMismatch,
                std::string(what) + ": shape " + to_string(a) + " vs " + to_string(b));
  }
}

}  // namespace tsal
