#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <vector>

#include "mmkws/error.hpp"

namespace mmkws {

// Dense row-major tensor. Rank is the length of `shape`; in practice the
// model uses rank-2 matrices and 1x1 scalars throughout.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> data;
  bool requires_grad = false;

  int64_t numel() const { return static_cast<int64_t>(data.size()); }

  int64_t rows() const {
    check(shape.size() == 2, "tensor is not rank-2");
    return shape[0];
  }
  int64_t cols() const {
    check(shape.size() == 2, "tensor is not rank-2");
    return shape[1];
  }

  double& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols() + c)]; }
  double at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols() + c)]; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

using TensorPtr = std::shared_ptr<Tensor>;

inline int64_t numel_of(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t s : shape) {
    check(s > 0, "tensor dimensions must be positive");
    n *= s;
  }
  return n;
}

inline TensorPtr tensor(std::vector<int64_t> shape, bool requires_grad = false) {
  auto t = std::make_shared<Tensor>();
  t->data.assign(static_cast<size_t>(numel_of(shape)), 0.0);
  t->shape = std::move(shape);
  t->requires_grad = requires_grad;
  return t;
}

inline TensorPtr tensor_of(std::vector<int64_t> shape, std::vector<double> data,
                           bool requires_grad = false) {
  check(numel_of(shape) == static_cast<int64_t>(data.size()),
        "tensor data length does not match shape");
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->data = std::move(data);
  t->requires_grad = requires_grad;
  return t;
}

inline TensorPtr scalar_tensor(double v, bool requires_grad = false) {
  return tensor_of({1, 1}, {v}, requires_grad);
}

}  // namespace mmkws
