#include "mmkws/tape.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>

#include "mmkws/kernels.hpp"

namespace mmkws {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double bce(double p, int label) {
  check(label == 0 || label == 1, "bce label must be 0 or 1");
  const double pc = std::clamp(p, kBceEps, 1.0 - kBceEps);
  return label == 1 ? -std::log(pc) : -std::log(1.0 - pc);
}

namespace {

bool any_rg(const std::vector<TensorPtr>& ts) {
  for (const auto& t : ts)
    if (t->requires_grad) return true;
  return false;
}

// The matmul kernels assign their output; gradients must accumulate, so
// route the product through a scratch buffer first.
void add_into(std::vector<double>& acc, const std::vector<double>& inc) {
  for (size_t i = 0; i < acc.size(); ++i) acc[i] += inc[i];
}

}  // namespace

void Tape::push(const char* name, TensorPtr out, std::function<void()> fwd,
                std::function<void(GradTable&)> bwd) {
  nodes_.push_back(Node{name, std::move(out), std::move(fwd), std::move(bwd)});
}

void Tape::replay() {
  for (auto& n : nodes_) n.fwd();
}

GradTable Tape::backward(const TensorPtr& output) const {
  check(output->numel() == 1, "backward requires a scalar output");
  GradTable gt;
  gt.acc(output)[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!it->out->requires_grad) continue;
    if (gt.find(it->out) == nullptr) continue;
    it->bwd(gt);
  }
  return gt;
}

TensorPtr Tape::matmul(const TensorPtr& a, const TensorPtr& b) {
  check(a->cols() == b->rows(), "matmul: inner dimensions differ");
  const int64_t m = a->rows(), k = a->cols(), n = b->cols();
  auto out = tensor({m, n}, any_rg({a, b}));
  auto fwd = [a, b, out, m, k, n] {
    kernels::matmul_nn(a->data.data(), b->data.data(), out->data.data(), m, k, n);
  };
  fwd();
  push("matmul", out, fwd, [a, b, out, m, k, n](GradTable& gt) {
    const auto& go = *gt.find(out);
    if (a->requires_grad) {
      std::vector<double> da(a->data.size());
      kernels::matmul_nt(go.data(), b->data.data(), da.data(), m, n, k);
      add_into(gt.acc(a), da);
    }
    if (b->requires_grad) {
      std::vector<double> db(b->data.size());
      kernels::matmul_tn(a->data.data(), go.data(), db.data(), k, m, n);
      add_into(gt.acc(b), db);
    }
  });
  return out;
}

TensorPtr Tape::matmul_nt(const TensorPtr& a, const TensorPtr& b) {
  check(a->cols() == b->cols(), "matmul_nt: inner dimensions differ");
  const int64_t m = a->rows(), k = a->cols(), n = b->rows();
  auto out = tensor({m, n}, any_rg({a, b}));
  auto fwd = [a, b, out, m, k, n] {
    kernels::matmul_nt(a->data.data(), b->data.data(), out->data.data(), m, k, n);
  };
  fwd();
  push("matmul_nt", out, fwd, [a, b, out, m, k, n](GradTable& gt) {
    const auto& go = *gt.find(out);
    if (a->requires_grad) {
      std::vector<double> da(a->data.size());
      kernels::matmul_nn(go.data(), b->data.data(), da.data(), m, n, k);
      add_into(gt.acc(a), da);
    }
    if (b->requires_grad) {
      std::vector<double> db(b->data.size());
      kernels::matmul_tn(go.data(), a->data.data(), db.data(), n, m, k);
      add_into(gt.acc(b), db);
    }
  });
  return out;
}

TensorPtr Tape::add(const TensorPtr& a, const TensorPtr& b) {
  check(a->shape == b->shape, "add: shape mismatch");
  auto out = tensor(a->shape, any_rg({a, b}));
  auto fwd = [a, b, out] {
    for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] + b->data[i];
  };
  fwd();
  push("add", out, fwd, [a, b, out](GradTable& gt) {
    const auto& go = *gt.find(out);
    if (a->requires_grad) {
      auto& ga = gt.acc(a);
      for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    }
    if (b->requires_grad) {
      auto& gb = gt.acc(b);
      for (size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
    }
  });
  return out;
}

TensorPtr Tape::add_rowvec(const TensorPtr& m, const TensorPtr& v) {
  check(v->rows() == 1 && v->cols() == m->cols(), "add_rowvec: vector width mismatch");
  const int64_t rows = m->rows(), cols = m->cols();
  auto out = tensor({rows, cols}, any_rg({m, v}));
  auto fwd = [m, v, out, rows, cols] {
    for (int64_t i = 0; i < rows; ++i)
      for (int64_t j = 0; j < cols; ++j)
        out->data[i * cols + j] = m->data[i * cols + j] + v->data[j];
  };
  fwd();
  push("add_rowvec", out, fwd, [m, v, out, rows, cols](GradTable& gt) {
    const auto& go = *gt.find(out);
    if (m->requires_grad) {
      auto& gm = gt.acc(m);
      for (size_t i = 0; i < go.size(); ++i) gm[i] += go[i];
    }
    if (v->requires_grad) {
      auto& gv = gt.acc(v);
      for (int64_t i = 0; i < rows; ++i)
        for (int64_t j = 0; j < cols; ++j) gv[j] += go[i * cols + j];
    }
  });
  return out;
}

TensorPtr Tape::scale(const TensorPtr& a, double c) {
  auto out = tensor(a->shape, a->requires_grad);
  auto fwd = [a, out, c] {
    for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = c * a->data[i];
  };
  fwd();
  push("scale", out, fwd, [a, out, c](GradTable& gt) {
    const auto& go = *gt.find(out);
    if (a->requires_grad) {
      auto& ga = gt.acc(a);
      for (size_t i = 0; i < go.size(); ++i) ga[i] += c * go[i];
    }
  });
  return out;
}

TensorPtr Tape::concat_rows(std::vector<TensorPtr> parts) {
  check(!parts.empty(), "concat_rows: no inputs");
  const int64_t cols = parts[0]->cols();
  int64_t rows = 0;
  for (const auto& p : parts) {
    check(p->cols() == cols, "concat_rows: column mismatch");
    rows += p->rows();
  }
  auto out = tensor({rows, cols}, any_rg(parts));
  auto fwd = [parts, out, cols] {
    int64_t r = 0;
    for (const auto& p : parts) {
      std::copy(p->data.begin(), p->data.end(), out->data.begin() + r * cols);
      r += p->rows();
    }
  };
  fwd();
  push("concat_rows", out, fwd, [parts, out, cols](GradTable& gt) {
    const auto& go = *gt.find(out);
    int64_t r = 0;
    for (const auto& p : parts) {
      if (p->requires_grad) {
        auto& gp = gt.acc(p);
        for (size_t i = 0; i < gp.size(); ++i) gp[i] += go[r * cols + i];
      }
      r += p->rows();
    }
  });
  return out;
}

TensorPtr Tape::slice_rows(const TensorPtr& a, int64_t r0, int64_t r1) {
  check(0 <= r0 && r0 < r1 && r1 <= a->rows(), "slice_rows: range out of bounds");
  const int64_t cols = a->cols();
  auto out = tensor({r1 - r0, cols}, a->requires_grad);
  auto fwd = [a, out, r0, r1, cols] {
    std::copy(a->data.begin() + r0 * cols, a->data.begin() + r1 * cols, out->data.begin());
  };
  fwd();
  push("slice_rows", out, fwd, [a, out, r0, cols](GradTable& gt) {
    const auto& go = *gt.find(out);
    if (a->requires_grad) {
      auto& ga = gt.acc(a);
      for (size_t i = 0; i < go.size(); ++i) ga[r0 * cols + i] += go[i];
    }
  });
  return out;
}

TensorPtr Tape::slice_cols(const TensorPtr& a, int64_t c0, int64_t c1) {
  check(0 <= c0 && c0 < c1 && c1 <= a->cols(), "slice_cols: range out of bounds");
  const int64_t rows = a->rows(), cols = a->cols(), w = c1 - c0;
  auto out = tensor({rows, w}, a->requires_grad);
  auto fwd = [a, out, rows, cols, c0, w] {
    for (int64_t i = 0; i < rows; ++i)
      for (int64_t j = 0; j < w; ++j) out->data[i * w + j] = a->data[i * cols + c0 + j];
  };
  fwd();
  push("slice_cols", out, fwd, [a, out, rows, cols, c0, w](GradTable& gt) {
    const auto& go = *gt.find(out);
    if (a->requires_grad) {
      auto& ga = gt.acc(a);
      for (int64_t i = 0; i < rows; ++i)
        for (int64_t j = 0; j < w; ++j) ga[i * cols + c0 + j] += go[i * w + j];
    }
  });
  return out;
}

TensorPtr Tape::concat_cols(std::vector<TensorPtr> parts) {
  check(!parts.empty(), "concat_cols: no inputs");
  const int64_t rows = parts[0]->rows();
  int64_t cols = 0;
  for (const auto& p : parts) {
    check(p->rows() == rows, "concat_cols: row mismatch");
    cols += p->cols();
  }
  auto out = tensor({rows, cols}, any_rg(parts));
  auto fwd = [parts, out, rows, cols] {
    int64_t c = 0;
    for (const auto& p : parts) {
      const int64_t w = p->cols();
      for (int64_t i = 0; i < rows; ++i)
        for (int64_t j = 0; j < w; ++j) out->data[i * cols + c + j] = p->data[i * w + j];
      c += w;
    }
  };
  fwd();
  push("concat_cols", out, fwd, [parts, out, rows, cols](GradTable& gt) {
    const auto& go = *gt.find(out);
    int64_t c = 0;
    for (const auto& p : parts) {
      const int64_t w = p->cols();
      if (p->requires_grad) {
        auto& gp = gt.acc(p);
        for (int64_t i = 0; i < rows; ++i)
          for (int64_t j = 0; j < w; ++j) gp[i * w + j] += go[i * cols + c + j];
      }
      c += w;
    }
  });
  return out;
}

TensorPtr Tape::softmax_rows(const TensorPtr& a) {
  check(a->numel() > 0 && a->rows() > 0 && a->cols() > 0, "empty input");
  const int64_t rows = a->rows(), cols = a->cols();
  auto out = tensor({rows, cols}, a->requires_grad);
  auto fwd = [a, out, rows, cols] {
    kernels::softmax_rows(a->data.data(), out->data.data(), rows, cols);
  };
  fwd();
  push("softmax_rows", out, fwd, [a, out, rows, cols](GradTable& gt) {
    const auto& go = *gt.find(out);
    if (!a->requires_grad) return;
    auto& ga = gt.acc(a);
    for (int64_t i = 0; i < rows; ++i) {
      const double* y = out->data.data() + i * cols;
      const double* dy = go.data() + i * cols;
      double dot = 0.0;
      for (int64_t j = 0; j < cols; ++j) dot += dy[j] * y[j];
      for (int64_t j = 0; j < cols; ++j) ga[i * cols + j] += y[j] * (dy[j] - dot);
    }
  });
  return out;
}

TensorPtr Tape::sigmoid(const TensorPtr& a) {
  auto out = tensor(a->shape, a->requires_grad);
  auto fwd = [a, out] {
    for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = mmkws::sigmoid(a->data[i]);
  };
  fwd();
  push("sigmoid", out, fwd, [a, out](GradTable& gt) {
    const auto& go = *gt.find(out);
    if (!a->requires_grad) return;
    auto& ga = gt.acc(a);
    for (size_t i = 0; i < go.size(); ++i) {
      const double y = out->data[i];
      ga[i] += go[i] * y * (1.0 - y);
    }
  });
  return out;
}

TensorPtr Tape::tanh(const TensorPtr& a) {
  auto out = tensor(a->shape, a->requires_grad);
  auto fwd = [a, out] {
    for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = std::tanh(a->data[i]);
  };
  fwd();
  push("tanh", out, fwd, [a, out](GradTable& gt) {
    const auto& go = *gt.find(out);
    if (!a->requires_grad) return;
    auto& ga = gt.acc(a);
    for (size_t i = 0; i < go.size(); ++i) {
      const double y = out->data[i];
      ga[i] += go[i] * (1.0 - y * y);
    }
  });
  return out;
}

TensorPtr Tape::layer_norm(const TensorPtr& x, const TensorPtr& gamma, const TensorPtr& beta) {
  const int64_t rows = x->rows(), cols = x->cols();
  check(gamma->rows() == 1 && gamma->cols() == cols, "layer_norm: gamma width mismatch");
  check(beta->rows() == 1 && beta->cols() == cols, "layer_norm: beta width mismatch");
  constexpr double eps = 1e-5;
  auto out = tensor({rows, cols}, any_rg({x, gamma, beta}));
  auto xhat = std::make_shared<std::vector<double>>(x->data.size());
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(rows));
  auto fwd = [x, gamma, beta, out, xhat, inv_std, rows, cols] {
    for (int64_t i = 0; i < rows; ++i) {
      const double* xi = x->data.data() + i * cols;
      double mu = 0.0;
      for (int64_t j = 0; j < cols; ++j) mu += xi[j];
      mu /= static_cast<double>(cols);
      double var = 0.0;
      for (int64_t j = 0; j < cols; ++j) var += (xi[j] - mu) * (xi[j] - mu);
      var /= static_cast<double>(cols);
      const double is = 1.0 / std::sqrt(var + eps);
      (*inv_std)[static_cast<size_t>(i)] = is;
      for (int64_t j = 0; j < cols; ++j) {
        const double xh = (xi[j] - mu) * is;
        (*xhat)[static_cast<size_t>(i * cols + j)] = xh;
        out->data[i * cols + j] = gamma->data[j] * xh + beta->data[j];
      }
    }
  };
  fwd();
  push("layer_norm", out, fwd, [x, gamma, beta, out, xhat, inv_std, rows, cols](GradTable& gt) {
    const auto& go = *gt.find(out);
    for (int64_t i = 0; i < rows; ++i) {
      const double* dy = go.data() + i * cols;
      const double* xh = xhat->data() + i * cols;
      if (gamma->requires_grad) {
        auto& gg = gt.acc(gamma);
        for (int64_t j = 0; j < cols; ++j) gg[j] += dy[j] * xh[j];
      }
      if (beta->requires_grad) {
        auto& gb = gt.acc(beta);
        for (int64_t j = 0; j < cols; ++j) gb[j] += dy[j];
      }
      if (x->requires_grad) {
        auto& gx = gt.acc(x);
        double m1 = 0.0, m2 = 0.0;
        for (int64_t j = 0; j < cols; ++j) {
          const double dxh = dy[j] * gamma->data[j];
          m1 += dxh;
          m2 += dxh * xh[j];
        }
        m1 /= static_cast<double>(cols);
        m2 /= static_cast<double>(cols);
        const double is = (*inv_std)[static_cast<size_t>(i)];
        for (int64_t j = 0; j < cols; ++j) {
          const double dxh = dy[j] * gamma->data[j];
          gx[i * cols + j] += is * (dxh - m1 - xh[j] * m2);
        }
      }
    }
  });
  return out;
}

TensorPtr Tape::dwconv3(const TensorPtr& x, const TensorPtr& k) {
  const int64_t t = x->rows(), d = x->cols();
  check(k->rows() == 3 && k->cols() == d, "dwconv3: kernel must be 3 x width");
  auto out = tensor({t, d}, any_rg({x, k}));
  auto fwd = [x, k, out, t, d] {
    kernels::dwconv3(x->data.data(), k->data.data(), out->data.data(), t, d);
  };
  fwd();
  push("dwconv3", out, fwd, [x, k, out, t, d](GradTable& gt) {
    const auto& go = *gt.find(out);
    if (k->requires_grad) {
      auto& gk = gt.acc(k);
      for (int64_t i = 0; i < t; ++i)
        for (int64_t c = 0; c < d; ++c) {
          const double g = go[i * d + c];
          if (i > 0) gk[c] += g * x->data[(i - 1) * d + c];
          gk[d + c] += g * x->data[i * d + c];
          if (i + 1 < t) gk[2 * d + c] += g * x->data[(i + 1) * d + c];
        }
    }
    if (x->requires_grad) {
      auto& gx = gt.acc(x);
      for (int64_t i = 0; i < t; ++i)
        for (int64_t c = 0; c < d; ++c) {
          const double g = go[i * d + c];
          if (i > 0) gx[(i - 1) * d + c] += g * k->data[c];
          gx[i * d + c] += g * k->data[d + c];
          if (i + 1 < t) gx[(i + 1) * d + c] += g * k->data[2 * d + c];
        }
    }
  });
  return out;
}

TensorPtr Tape::embedding(const TensorPtr& table, std::vector<int64_t> ids) {
  check(!ids.empty(), "embedding: empty id list");
  const int64_t v = table->rows(), d = table->cols();
  for (int64_t id : ids) check(0 <= id && id < v, "embedding: id out of range");
  const int64_t n = static_cast<int64_t>(ids.size());
  auto out = tensor({n, d}, table->requires_grad);
  auto ids_p = std::make_shared<std::vector<int64_t>>(std::move(ids));
  auto fwd = [table, out, ids_p, n, d] {
    for (int64_t i = 0; i < n; ++i)
      std::copy(table->data.begin() + (*ids_p)[static_cast<size_t>(i)] * d,
                table->data.begin() + ((*ids_p)[static_cast<size_t>(i)] + 1) * d,
                out->data.begin() + i * d);
  };
  fwd();
  push("embedding", out, fwd, [table, out, ids_p, n, d](GradTable& gt) {
    const auto& go = *gt.find(out);
    if (!table->requires_grad) return;
    auto& gtab = gt.acc(table);
    for (int64_t i = 0; i < n; ++i) {
      const int64_t id = (*ids_p)[static_cast<size_t>(i)];
      for (int64_t j = 0; j < d; ++j) gtab[id * d + j] += go[i * d + j];
    }
  });
  return out;
}

namespace {

// Per-step activations saved by the GRU forward for backpropagation through time.
struct GruSaved {
  std::vector<double> h;   // (t+1) x hid, h[0] = 0
  std::vector<double> z;   // t x hid
  std::vector<double> r;   // t x hid
  std::vector<double> hh;  // t x hid
};

void gru_forward(const Tensor& x, const GruParams& p, GruSaved& s, Tensor& out) {
  const int64_t t = x.rows(), d = x.cols(), h = p.hidden();
  s.h.assign(static_cast<size_t>((t + 1) * h), 0.0);
  s.z.assign(static_cast<size_t>(t * h), 0.0);
  s.r.assign(static_cast<size_t>(t * h), 0.0);
  s.hh.assign(static_cast<size_t>(t * h), 0.0);
  std::vector<double> az(static_cast<size_t>(h)), ar(static_cast<size_t>(h)),
      ah(static_cast<size_t>(h)), rh(static_cast<size_t>(h));
  for (int64_t step = 0; step < t; ++step) {
    const double* xt = x.data.data() + step * d;
    const double* hp = s.h.data() + step * h;
    for (int64_t j = 0; j < h; ++j) {
      double vz = p.bz->data[j], vr = p.br->data[j];
      for (int64_t i = 0; i < d; ++i) {
        vz += xt[i] * p.wz->data[i * h + j];
        vr += xt[i] * p.wr->data[i * h + j];
      }
      for (int64_t i = 0; i < h; ++i) {
        vz += hp[i] * p.uz->data[i * h + j];
        vr += hp[i] * p.ur->data[i * h + j];
      }
      az[static_cast<size_t>(j)] = vz;
      ar[static_cast<size_t>(j)] = vr;
    }
    double* zt = s.z.data() + step * h;
    double* rt = s.r.data() + step * h;
    for (int64_t j = 0; j < h; ++j) {
      zt[j] = sigmoid(az[static_cast<size_t>(j)]);
      rt[j] = sigmoid(ar[static_cast<size_t>(j)]);
      rh[static_cast<size_t>(j)] = rt[j] * hp[j];
    }
    double* hht = s.hh.data() + step * h;
    for (int64_t j = 0; j < h; ++j) {
      double v = p.bh->data[j];
      for (int64_t i = 0; i < d; ++i) v += xt[i] * p.wh->data[i * h + j];
      for (int64_t i = 0; i < h; ++i) v += rh[static_cast<size_t>(i)] * p.uh->data[i * h + j];
      ah[static_cast<size_t>(j)] = v;
      hht[j] = std::tanh(v);
    }
    double* hn = s.h.data() + (step + 1) * h;
    for (int64_t j = 0; j < h; ++j) hn[j] = (1.0 - zt[j]) * hp[j] + zt[j] * hht[j];
  }
  std::copy(s.h.end() - h, s.h.end(), out.data.begin());
}

}  // namespace

TensorPtr Tape::gru(const TensorPtr& x, const GruParams& p) {
  check(x->rows() >= 1, "gru: empty input sequence");
  check(x->cols() == p.input_dim(), "gru: input width mismatch");
  const int64_t t = x->rows(), d = x->cols(), h = p.hidden();
  auto out = tensor({1, h}, any_rg({x, p.wz, p.wr, p.wh, p.uz, p.ur, p.uh, p.bz, p.br, p.bh}));
  auto saved = std::make_shared<GruSaved>();
  auto fwd = [x, p, out, saved] { gru_forward(*x, p, *saved, *out); };
  fwd();
  push("gru", out, fwd, [x, p, out, saved, t, d, h](GradTable& gt) {
    const auto& go = *gt.find(out);
    std::vector<double> dh(go.begin(), go.end());
    std::vector<double> dhp(static_cast<size_t>(h)), dz(static_cast<size_t>(h)),
        dhh(static_cast<size_t>(h)), dah(static_cast<size_t>(h)), drh(static_cast<size_t>(h)),
        dr(static_cast<size_t>(h)), daz(static_cast<size_t>(h)), dar(static_cast<size_t>(h)),
        rh(static_cast<size_t>(h));
    const bool want_x = x->requires_grad;
    std::vector<double>* gx = want_x ? &gt.acc(x) : nullptr;
    auto* gwz = p.wz->requires_grad ? &gt.acc(p.wz) : nullptr;
    auto* gwr = p.wr->requires_grad ? &gt.acc(p.wr) : nullptr;
    auto* gwh = p.wh->requires_grad ? &gt.acc(p.wh) : nullptr;
    auto* guz = p.uz->requires_grad ? &gt.acc(p.uz) : nullptr;
    auto* gur = p.ur->requires_grad ? &gt.acc(p.ur) : nullptr;
    auto* guh = p.uh->requires_grad ? &gt.acc(p.uh) : nullptr;
    auto* gbz = p.bz->requires_grad ? &gt.acc(p.bz) : nullptr;
    auto* gbr = p.br->requires_grad ? &gt.acc(p.br) : nullptr;
    auto* gbh = p.bh->requires_grad ? &gt.acc(p.bh) : nullptr;
    for (int64_t step = t - 1; step >= 0; --step) {
      const double* xt = x->data.data() + step * d;
      const double* hp = saved->h.data() + step * h;
      const double* zt = saved->z.data() + step * h;
      const double* rt = saved->r.data() + step * h;
      const double* hht = saved->hh.data() + step * h;
      for (int64_t j = 0; j < h; ++j) {
        dz[static_cast<size_t>(j)] = dh[static_cast<size_t>(j)] * (hht[j] - hp[j]);
        dhh[static_cast<size_t>(j)] = dh[static_cast<size_t>(j)] * zt[j];
        dhp[static_cast<size_t>(j)] = dh[static_cast<size_t>(j)] * (1.0 - zt[j]);
        dah[static_cast<size_t>(j)] = dhh[static_cast<size_t>(j)] * (1.0 - hht[j] * hht[j]);
        daz[static_cast<size_t>(j)] = dz[static_cast<size_t>(j)] * zt[j] * (1.0 - zt[j]);
        rh[static_cast<size_t>(j)] = rt[j] * hp[j];
      }
      // candidate path: ah = x Wh + (r .* h_prev) Uh + bh
      for (int64_t i = 0; i < h; ++i) {
        double acc = 0.0;
        for (int64_t j = 0; j < h; ++j) acc += dah[static_cast<size_t>(j)] * p.uh->data[i * h + j];
        drh[static_cast<size_t>(i)] = acc;
      }
      for (int64_t j = 0; j < h; ++j) {
        dr[static_cast<size_t>(j)] = drh[static_cast<size_t>(j)] * hp[j];
        dhp[static_cast<size_t>(j)] += drh[static_cast<size_t>(j)] * rt[j];
        dar[static_cast<size_t>(j)] = dr[static_cast<size_t>(j)] * rt[j] * (1.0 - rt[j]);
      }
      if (gwh)
        for (int64_t i = 0; i < d; ++i)
          for (int64_t j = 0; j < h; ++j) (*gwh)[i * h + j] += xt[i] * dah[static_cast<size_t>(j)];
      if (guh)
        for (int64_t i = 0; i < h; ++i)
          for (int64_t j = 0; j < h; ++j)
            (*guh)[i * h + j] += rh[static_cast<size_t>(i)] * dah[static_cast<size_t>(j)];
      if (gbh)
        for (int64_t j = 0; j < h; ++j) (*gbh)[j] += dah[static_cast<size_t>(j)];
      if (gwz)
        for (int64_t i = 0; i < d; ++i)
          for (int64_t j = 0; j < h; ++j) (*gwz)[i * h + j] += xt[i] * daz[static_cast<size_t>(j)];
      if (guz)
        for (int64_t i = 0; i < h; ++i)
          for (int64_t j = 0; j < h; ++j) (*guz)[i * h + j] += hp[i] * daz[static_cast<size_t>(j)];
      if (gbz)
        for (int64_t j = 0; j < h; ++j) (*gbz)[j] += daz[static_cast<size_t>(j)];
      if (gwr)
        for (int64_t i = 0; i < d; ++i)
          for (int64_t j = 0; j < h; ++j) (*gwr)[i * h + j] += xt[i] * dar[static_cast<size_t>(j)];
      if (gur)
        for (int64_t i = 0; i < h; ++i)
          for (int64_t j = 0; j < h; ++j) (*gur)[i * h + j] += hp[i] * dar[static_cast<size_t>(j)];
      if (gbr)
        for (int64_t j = 0; j < h; ++j) (*gbr)[j] += dar[static_cast<size_t>(j)];
      if (gx)
        for (int64_t i = 0; i < d; ++i) {
          double acc = 0.0;
          for (int64_t j = 0; j < h; ++j)
            acc += dah[static_cast<size_t>(j)] * p.wh->data[i * h + j] +
                   daz[static_cast<size_t>(j)] * p.wz->data[i * h + j] +
                   dar[static_cast<size_t>(j)] * p.wr->data[i * h + j];
          (*gx)[step * d + i] += acc;
        }
      // recurrent contributions into h_{step-1}
      for (int64_t i = 0; i < h; ++i) {
        double acc = dhp[static_cast<size_t>(i)];
        for (int64_t j = 0; j < h; ++j)
          acc += daz[static_cast<size_t>(j)] * p.uz->data[i * h + j] +
                 dar[static_cast<size_t>(j)] * p.ur->data[i * h + j];
        dh[static_cast<size_t>(i)] = acc;
      }
    }
  });
  return out;
}

TensorPtr Tape::bce_loss(const TensorPtr& p, std::vector<double> labels) {
  check(p->data.size() == labels.size(), "bce_loss: label count mismatch");
  for (double l : labels) check(l == 0.0 || l == 1.0, "bce label must be 0 or 1");
  auto out = tensor(p->shape, p->requires_grad);
  auto lab = std::make_shared<std::vector<double>>(std::move(labels));
  auto fwd = [p, out, lab] {
    for (size_t i = 0; i < out->data.size(); ++i)
      out->data[i] = bce(p->data[i], static_cast<int>((*lab)[i]));
  };
  fwd();
  push("bce_loss", out, fwd, [p, out, lab](GradTable& gt) {
    const auto& go = *gt.find(out);
    if (!p->requires_grad) return;
    auto& gp = gt.acc(p);
    for (size_t i = 0; i < go.size(); ++i) {
      const double pv = p->data[i];
      if (pv < kBceEps || pv > 1.0 - kBceEps) continue;  // clamped region
      gp[i] += go[i] * (pv - (*lab)[i]) / (pv * (1.0 - pv));
    }
  });
  return out;
}

TensorPtr Tape::mean_all(const TensorPtr& a) {
  const int64_t n = a->numel();
  check(n > 0, "mean_all: empty input");
  auto out = tensor({1, 1}, a->requires_grad);
  auto fwd = [a, out, n] {
    double s = 0.0;
    for (double v : a->data) s += v;
    out->data[0] = s / static_cast<double>(n);
  };
  fwd();
  push("mean_all", out, fwd, [a, out, n](GradTable& gt) {
    const auto& go = *gt.find(out);
    if (!a->requires_grad) return;
    auto& ga = gt.acc(a);
    const double g = go[0] / static_cast<double>(n);
    for (size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
  return out;
}

}  // namespace mmkws
