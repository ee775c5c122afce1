// Benchmarks the OpenMP kernels against the serial reference implementations
// and verifies that both produce bit-identical results.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <vector>

#include "mmkws/kernels.hpp"
#include "mmkws/rng.hpp"

namespace {

double now_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

std::vector<double> random_vec(int64_t n, uint64_t seed) {
  mmkws::Rng rng(seed);
  std::vector<double> v(static_cast<size_t>(n));
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

template <class F>
double best_of(F f, int iters) {
  double best = 1e300;
  for (int i = 0; i < iters; ++i) {
    const double t0 = now_s();
    f();
    const double dt = now_s() - t0;
    if (dt < best) best = dt;
  }
  return best;
}

bool report(const char* name, double serial_s, double parallel_s, const std::vector<double>& a,
            const std::vector<double>& b) {
  const bool same = std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
  std::printf("%-12s  serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx   %s\n", name,
              serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s,
              same ? "bit-identical" : "RESULTS DIFFER");
  return same;
}

}  // namespace

int main() {
  namespace k = mmkws::kernels;
  std::printf("kernel benchmark, %d OpenMP thread(s)\n\n", k::max_threads());
  const int iters = 5;
  bool all_same = true;

  {
    const int64_t m = 256, kk = 256, n = 256;
    auto a = random_vec(m * kk, 11);
    auto b = random_vec(kk * n, 12);
    std::vector<double> cr(static_cast<size_t>(m * n)), cp(cr.size());
    const double ts = best_of([&] { k::ref::matmul_nn(a.data(), b.data(), cr.data(), m, kk, n); }, iters);
    const double tp = best_of([&] { k::matmul_nn(a.data(), b.data(), cp.data(), m, kk, n); }, iters);
    all_same &= report("matmul_nn", ts, tp, cr, cp);
  }
  {
    const int64_t m = 256, kk = 256, n = 256;
    auto a = random_vec(m * kk, 21);
    auto b = random_vec(n * kk, 22);
    std::vector<double> cr(static_cast<size_t>(m * n)), cp(cr.size());
    const double ts = best_of([&] { k::ref::matmul_nt(a.data(), b.data(), cr.data(), m, kk, n); }, iters);
    const double tp = best_of([&] { k::matmul_nt(a.data(), b.data(), cp.data(), m, kk, n); }, iters);
    all_same &= report("matmul_nt", ts, tp, cr, cp);
  }
  {
    const int64_t m = 256, kk = 256, n = 256;
    auto a = random_vec(kk * m, 31);
    auto b = random_vec(kk * n, 32);
    std::vector<double> cr(static_cast<size_t>(m * n)), cp(cr.size());
    const double ts = best_of([&] { k::ref::matmul_tn(a.data(), b.data(), cr.data(), m, kk, n); }, iters);
    const double tp = best_of([&] { k::matmul_tn(a.data(), b.data(), cp.data(), m, kk, n); }, iters);
    all_same &= report("matmul_tn", ts, tp, cr, cp);
  }
  {
    const int64_t rows = 2048, cols = 512;
    auto x = random_vec(rows * cols, 41);
    std::vector<double> yr(static_cast<size_t>(rows * cols)), yp(yr.size());
    const double ts = best_of([&] { k::ref::softmax_rows(x.data(), yr.data(), rows, cols); }, iters);
    const double tp = best_of([&] { k::softmax_rows(x.data(), yp.data(), rows, cols); }, iters);
    all_same &= report("softmax_rows", ts, tp, yr, yp);
  }
  {
    const int64_t t = 16384, d = 64;
    auto x = random_vec(t * d, 51);
    auto kern = random_vec(3 * d, 52);
    std::vector<double> yr(static_cast<size_t>(t * d)), yp(yr.size());
    const double ts = best_of([&] { k::ref::dwconv3(x.data(), kern.data(), yr.data(), t, d); }, iters);
    const double tp = best_of([&] { k::dwconv3(x.data(), kern.data(), yp.data(), t, d); }, iters);
    all_same &= report("dwconv3", ts, tp, yr, yp);
  }

  std::printf("\n%s\n", all_same ? "all kernels bit-identical" : "MISMATCH DETECTED");
  return all_same ? 0 : 1;
}
