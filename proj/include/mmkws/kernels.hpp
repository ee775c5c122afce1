#pragma once

#include <cstdint>

// Dense numeric kernels. The functions in mmkws::kernels parallelize their
// outer loop with OpenMP; mmkws::kernels::ref holds plain serial versions
// kept as the test/benchmark reference. Every kernel accumulates each output
// element in the same order on both paths, so parallel and serial results
// are bit-identical.

namespace mmkws::kernels {

// C[m x n] = A[m x k] * B[k x n]
void matmul_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
// C[m x n] = A[m x k] * B^T, with B stored [n x k]
void matmul_nt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
// C[m x n] = A^T * B, with A stored [k x m], B stored [k x n]
void matmul_tn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
// Row-wise softmax, stabilized by row-max subtraction.
void softmax_rows(const double* x, double* y, int64_t rows, int64_t cols);
// Depthwise temporal convolution, kernel width 3, zero-padded ends.
// x,y are [t x d]; k is [3 x d].
void dwconv3(const double* x, const double* k, double* y, int64_t t, int64_t d);

int max_threads();
void set_threads(int n);

namespace ref {
void matmul_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void matmul_nt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void matmul_tn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void softmax_rows(const double* x, double* y, int64_t rows, int64_t cols);
void dwconv3(const double* x, const double* k, double* y, int64_t t, int64_t d);
}  // namespace ref

}  // namespace mmkws::kernels
