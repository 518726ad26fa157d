// Copyright 2026 The GRU-Net Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <new>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace grunet {

using Index = std::int64_t;
using Shape = std::vector<Index>;

Index element_count(const Shape& shape);

/// Cache-line aligned storage. Vectorised reductions peel a prefix that depends on the buffer
/// address, so a fixed alignment is what makes results bit-identical from run to run.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using AlignedBuffer = std::vector<double, AlignedAllocator<double>>;
std::string to_string(const Shape& shape);

/// Dense row-major array of doubles. Rank-4 image tensors use (B, H, W, C) order.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value) { return Tensor({1}, value); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  Index dim(std::size_t axis) const { return shape_.at(axis); }
  Index size() const { return static_cast<Index>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](Index i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](Index i) const { return data_[static_cast<std::size_t>(i)]; }

  /// Rank-4 accessor.
  double& at(Index b, Index h, Index w, Index c) {
    return data_[static_cast<std::size_t>(((b * shape_[1] + h) * shape_[2] + w) * shape_[3] + c)];
  }
  double at(Index b, Index h, Index w, Index c) const {
    return data_[static_cast<std::size_t>(((b * shape_[1] + h) * shape_[2] + w) * shape_[3] + c)];
  }

  /// Same storage order, new shape. Element counts must agree.
  Tensor reshaped(Shape shape) const;
  void fill(double value);
  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  AlignedBuffer data_;
};

/// Max |a - b| over all elements; shapes must agree.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace grunet
