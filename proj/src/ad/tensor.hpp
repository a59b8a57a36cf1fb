#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace ad {

using Shape = std::vector<int64_t>;

int64_t numel(const Shape& s);
std::string shape_str(const Shape& s);

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownKindError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense row-major f64 tensor. The buffer is shared; tensors are treated as
/// immutable values once created (the optimizer mutates parameter buffers
/// in place between passes, which is the one sanctioned exception).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor scalar(double v) { return full({}, v); }
  static Tensor from(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  int64_t size() const { return buf_ ? static_cast<int64_t>(buf_->size()) : 0; }
  int64_t dim(int i) const { return shape_.at(i < 0 ? shape_.size() + i : i); }
  int ndim() const { return static_cast<int>(shape_.size()); }
  bool defined() const { return buf_ != nullptr; }

  double* data() { return buf_->data(); }
  const double* data() const { return buf_->data(); }
  double item() const;
  double& at(std::initializer_list<int64_t> idx);
  double at(std::initializer_list<int64_t> idx) const;

  bool requires_grad() const { return requires_grad_; }
  int64_t node() const { return node_; }
  bool tracked() const { return node_ >= 0; }
  const void* owner() const { return owner_; }

  /// Deep copy with detached identity.
  Tensor clone() const;

 private:
  std::shared_ptr<std::vector<double>> buf_;
  Shape shape_;
  int64_t node_ = -1;
  bool requires_grad_ = false;
  const void* owner_ = nullptr;  // tape that issued node_

  friend class Tape;
};

bool same_shape(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& t);

}  // namespace ad
