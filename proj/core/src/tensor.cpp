// SPDX-License-Identifier: Apache-2.0

#include "saccade/tensor.hpp"

#include <numeric>
#include <sstream>

namespace saccade::ad {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (int e : shape) {
    if (e < 0) throw std::invalid_argument("negative extent in shape " + shape_str(shape));
    n *= static_cast<std::size_t>(e);
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void check(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  Tensor t;
  t.d_ = std::make_shared<Data>();
  t.d_->shape = std::move(shape);
  t.d_->values.assign(shape_numel(t.d_->shape), 0.0f);
  t.d_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.d_->values.begin(), t.d_->values.end(), value);
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<float> values, bool requires_grad) {
  if (values.size() != shape_numel(shape))
    throw std::invalid_argument("value count does not match shape " + shape_str(shape));
  Tensor t;
  t.d_ = std::make_shared<Data>();
  t.d_->shape = std::move(shape);
  t.d_->values = std::move(values);
  t.d_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(float value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

float Tensor::item() const {
  if (numel() != 1) throw std::invalid_argument("item() on non-scalar tensor " + shape_str(shape()));
  return d_->values[0];
}

std::span<float> Tensor::grad() const {
  if (d_->grad.empty()) d_->grad.assign(d_->values.size(), 0.0f);
  return d_->grad;
}

std::span<const float> Tensor::grad_view() const {
  return d_->grad;
}

void Tensor::zero_grad() const {
  if (!d_->grad.empty()) std::fill(d_->grad.begin(), d_->grad.end(), 0.0f);
}

Tensor Tensor::detached_copy() const {
  return Tensor::from(d_->shape, d_->values, false);
}

}  // namespace saccade::ad
