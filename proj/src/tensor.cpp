// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "pq/tensor.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>

namespace pq {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
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

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_str(shape_));
  }
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_str(shape_));
  }
  return data_[0];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_str(shape_) + " to " +
                     shape_str(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool Tensor::bitwise_equal(const Tensor& other) const {
  return shape_ == other.shape_ &&
         (data_.empty() ||
          std::memcmp(data_.data(), other.data_.data(),
                      data_.size() * sizeof(double)) == 0);
}

void check_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) {
    throw NumericError(std::string(what) + ": non-finite value in output");
  }
}

}  // namespace pq
