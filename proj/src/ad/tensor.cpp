#include "ad/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace ad {

int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double v) {
  for (int64_t d : shape)
    if (d <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  Tensor t;
  t.shape_ = std::move(shape);
  t.buf_ = std::make_shared<std::vector<double>>(numel(t.shape_), v);
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  if (numel(shape) != static_cast<int64_t>(values.size()))
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  Tensor t;
  t.shape_ = std::move(shape);
  t.buf_ = std::make_shared<std::vector<double>>(std::move(values));
  return t;
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape_));
  return (*buf_)[0];
}

static int64_t flat_index(const Shape& shape, std::initializer_list<int64_t> idx) {
  if (idx.size() != shape.size()) throw ShapeError("index rank mismatch");
  int64_t flat = 0;
  auto it = idx.begin();
  for (size_t i = 0; i < shape.size(); ++i, ++it) {
    if (*it < 0 || *it >= shape[i]) throw ShapeError("index out of range");
    flat = flat * shape[i] + *it;
  }
  return flat;
}

double& Tensor::at(std::initializer_list<int64_t> idx) {
  return (*buf_)[flat_index(shape_, idx)];
}
double Tensor::at(std::initializer_list<int64_t> idx) const {
  return (*buf_)[flat_index(shape_, idx)];
}

Tensor Tensor::clone() const {
  Tensor t;
  t.shape_ = shape_;
  t.buf_ = std::make_shared<std::vector<double>>(*buf_);
  return t;
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape() == b.shape(); }

bool all_finite(const Tensor& t) {
  const double* p = t.data();
  for (int64_t i = 0; i < t.size(); ++i)
    if (!std::isfinite(p[i])) return false;
  return true;
}

}  // namespace ad
