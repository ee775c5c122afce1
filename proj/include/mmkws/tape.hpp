#pragma once

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "mmkws/tensor.hpp"

namespace mmkws {

// Numerically stable logistic function.
double sigmoid(double x);

// Binary cross-entropy of a probability against a 0/1 label, with the
// probability clamped to [kBceEps, 1 - kBceEps].
inline constexpr double kBceEps = 1e-7;
double bce(double p, int label);

struct GruParams {
  TensorPtr wz, wr, wh;  // input weights, d x h
  TensorPtr uz, ur, uh;  // recurrent weights, h x h
  TensorPtr bz, br, bh;  // biases, 1 x h
  int64_t hidden() const { return wz->cols(); }
  int64_t input_dim() const { return wz->rows(); }
};

// Maps tensors to accumulated gradients. Parameters that never appeared in
// the recorded computation read back as zeros of the right shape.
class GradTable {
 public:
  std::vector<double>& acc(const TensorPtr& t) {
    auto& g = grads_[t.get()];
    if (g.empty()) g.assign(t->data.size(), 0.0);
    return g;
  }
  const std::vector<double>* find(const TensorPtr& t) const {
    auto it = grads_.find(t.get());
    return it == grads_.end() ? nullptr : &it->second;
  }
  Tensor grad_or_zero(const TensorPtr& t) const {
    Tensor g;
    g.shape = t->shape;
    if (const auto* v = find(t))
      g.data = *v;
    else
      g.data.assign(t->data.size(), 0.0);
    return g;
  }

 private:
  std::unordered_map<const Tensor*, std::vector<double>> grads_;
};

// Record of the primitive operations of one forward pass, in application
// order. Supports reverse-mode differentiation of a scalar output and
// bit-exact replay of the forward values.
class Tape {
 public:
  TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
  // a * b^T with b stored row-major [n x k]
  TensorPtr matmul_nt(const TensorPtr& a, const TensorPtr& b);
  TensorPtr add(const TensorPtr& a, const TensorPtr& b);
  // m[t x n] + broadcast of v[1 x n] over every row
  TensorPtr add_rowvec(const TensorPtr& m, const TensorPtr& v);
  TensorPtr scale(const TensorPtr& a, double c);
  TensorPtr concat_rows(std::vector<TensorPtr> parts);
  TensorPtr slice_rows(const TensorPtr& a, int64_t r0, int64_t r1);
  TensorPtr slice_cols(const TensorPtr& a, int64_t c0, int64_t c1);
  TensorPtr concat_cols(std::vector<TensorPtr> parts);
  TensorPtr softmax_rows(const TensorPtr& a);
  TensorPtr sigmoid(const TensorPtr& a);
  TensorPtr tanh(const TensorPtr& a);
  TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gamma, const TensorPtr& beta);
  TensorPtr dwconv3(const TensorPtr& x, const TensorPtr& k);
  TensorPtr embedding(const TensorPtr& table, std::vector<int64_t> ids);
  // Unidirectional GRU over the rows of x; returns the final hidden state 1 x h.
  TensorPtr gru(const TensorPtr& x, const GruParams& p);
  // Elementwise BCE against 0/1 labels (one per element of p).
  TensorPtr bce_loss(const TensorPtr& p, std::vector<double> labels);
  TensorPtr mean_all(const TensorPtr& a);

  // Reverse-mode gradients of a scalar output w.r.t. everything recorded.
  GradTable backward(const TensorPtr& output) const;

  // Recomputes every recorded output in order from its inputs.
  void replay();

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    const char* name;
    TensorPtr out;
    std::function<void()> fwd;
    std::function<void(GradTable&)> bwd;
  };
  void push(const char* name, TensorPtr out, std::function<void()> fwd,
            std::function<void(GradTable&)> bwd);
  std::vector<Node> nodes_;
};

}  // namespace mmkws
