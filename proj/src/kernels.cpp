#include "mmkws/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mmkws::kernels {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

namespace ref {

void matmul_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
  std::memset(c, 0, sizeof(double) * static_cast<size_t>(m * n));
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b + p * n;
      double* crow = c + i * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (int64_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] = acc;
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
  std::memset(c, 0, sizeof(double) * static_cast<size_t>(m * n));
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t p = 0; p < k; ++p) {
      const double av = a[p * m + i];
      const double* brow = b + p * n;
      double* crow = c + i * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void softmax_rows(const double* x, double* y, int64_t rows, int64_t cols) {
  for (int64_t i = 0; i < rows; ++i) {
    const double* xi = x + i * cols;
    double* yi = y + i * cols;
    double mx = xi[0];
    for (int64_t j = 1; j < cols; ++j) mx = std::max(mx, xi[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < cols; ++j) {
      yi[j] = std::exp(xi[j] - mx);
      sum += yi[j];
    }
    for (int64_t j = 0; j < cols; ++j) yi[j] /= sum;
  }
}

void dwconv3(const double* x, const double* k, double* y, int64_t t, int64_t d) {
  for (int64_t i = 0; i < t; ++i) {
    for (int64_t c = 0; c < d; ++c) {
      double acc = 0.0;
      if (i > 0) acc += k[c] * x[(i - 1) * d + c];
      acc += k[d + c] * x[i * d + c];
      if (i + 1 < t) acc += k[2 * d + c] * x[(i + 1) * d + c];
      y[i * d + c] = acc;
    }
  }
}

}  // namespace ref

// Parallel variants: one thread owns one output row, and within a row the
// accumulation order matches the serial reference exactly.

void matmul_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    std::memset(crow, 0, sizeof(double) * static_cast<size_t>(n));
    for (int64_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (int64_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] = acc;
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    std::memset(crow, 0, sizeof(double) * static_cast<size_t>(n));
    for (int64_t p = 0; p < k; ++p) {
      const double av = a[p * m + i];
      const double* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void softmax_rows(const double* x, double* y, int64_t rows, int64_t cols) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < rows; ++i) {
    ref::softmax_rows(x + i * cols, y + i * cols, 1, cols);
  }
}

void dwconv3(const double* x, const double* k, double* y, int64_t t, int64_t d) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < t; ++i) {
    for (int64_t c = 0; c < d; ++c) {
      double acc = 0.0;
      if (i > 0) acc += k[c] * x[(i - 1) * d + c];
      acc += k[d + c] * x[i * d + c];
      if (i + 1 < t) acc += k[2 * d + c] * x[(i + 1) * d + c];
      y[i * d + c] = acc;
    }
  }
}

}  // namespace mmkws::kernels
