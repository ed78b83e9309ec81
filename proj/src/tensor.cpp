#include "lped/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "lped/error.hpp"

namespace lped {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Dimension: return "dimension error";
    case ErrorKind::Value: return "value error";
    case ErrorKind::Config: return "configuration error";
    case ErrorKind::Data: return "data error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Version: return "version error";
    case ErrorKind::State: return "state error";
    case ErrorKind::Io: return "io error";
  }
  return "error";
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '[' << n << ", " << c << ", " << h << ", " << w << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(shape), data_(shape.numel(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(shape), data_(std::move(values)) {
  if (data_.size() != shape_.numel()) {
    fail(ErrorKind::Shape, "tensor of shape " + shape_.str() + " given " +
                               std::to_string(data_.size()) + " values");
  }
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.numel() != data_.size()) {
    fail(ErrorKind::Shape,
         "cannot reshape " + shape_.str() + " to " + shape.str());
  }
  return Tensor(shape, data_);
}

Tensor Tensor::sample(int n) const {
  Shape s = shape_;
  s.n = 1;
  const std::size_t stride = s.numel();
  std::vector<double> out(data_.begin() + n * stride,
                          data_.begin() + (n + 1) * stride);
  return Tensor(s, std::move(out));
}

Tensor Tensor::stack(std::span<const Tensor> items) {
  if (items.empty()) fail(ErrorKind::Shape, "stack of zero tensors");
  Shape s = items.front().shape();
  int total = 0;
  for (const Tensor& t : items) {
    Shape probe = t.shape();
    probe.n = s.n;
    require_same_shape(probe, s, "stack");
    total += t.shape().n;
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(total) * s.c * s.h * s.w);
  for (const Tensor& t : items) {
    out.insert(out.end(), t.storage().begin(), t.storage().end());
  }
  s.n = total;
  return Tensor(s, std::move(out));
}

double Tensor::sum() const {
  return std::accumulate(data_.begin(), data_.end(), 0.0);
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (!(a == b)) {
    fail(ErrorKind::Shape, std::string(what) + ": shape " + a.str() +
                               " does not match " + b.str());
  }
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a.shape(), b.shape(), "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

}  // namespace lped
