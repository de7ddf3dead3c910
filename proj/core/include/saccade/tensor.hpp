// SPDX-License-Identifier: Apache-2.0
//
// Dense float32 tensor with optional gradient storage. Tensors are cheap
// shared handles; copying a Tensor aliases the underlying buffer.

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace saccade::ad {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<float> values, bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const { return d_ != nullptr; }
  const Shape& shape() const { return d_->shape; }
  int dim(int i) const { return d_->shape.at(static_cast<std::size_t>(i)); }
  int rank() const { return static_cast<int>(d_->shape.size()); }
  std::size_t numel() const { return d_->values.size(); }

  std::span<float> values() { return d_->values; }
  std::span<const float> values() const { return d_->values; }
  float* data() { return d_->values.data(); }
  const float* data() const { return d_->values.data(); }

  float item() const;

  bool requires_grad() const { return d_->requires_grad; }
  void set_requires_grad(bool v) { d_->requires_grad = v; }

  // Gradient buffer; allocated (zero-filled) on first access through grad().
  // Tensors are shared handles, so the workspace is mutable through const
  // handles (as with the pointee of a shared_ptr).
  bool has_grad() const { return d_ && !d_->grad.empty(); }
  std::span<float> grad() const;
  std::span<const float> grad_view() const;
  void zero_grad() const;
  void drop_grad() const { d_->grad.clear(); }

  // Identity of the underlying buffer, for aliasing checks.
  const void* id() const { return d_.get(); }

  Tensor detached_copy() const;

 private:
  struct Data {
    Shape shape;
    std::vector<float> values;
    std::vector<float> grad;  // empty until touched
    bool requires_grad = false;
  };
  std::shared_ptr<Data> d_;
};

void check(bool cond, const std::string& msg);

}  // namespace saccade::ad

namespace saccade {
using ad::check;
using ad::Shape;
using ad::shape_numel;
using ad::shape_str;
using ad::Tensor;
}  // namespace saccade
