#include "maint/kernels.hpp"

#include <atomic>

#ifdef MAINT_HAVE_OPENMP
#include <omp.h>
#endif

namespace maint::kernels {

namespace serial {

void matvec(const double* W, const double* x, double* y, std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    const double* row = W + i * n;
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

void matvec_t_accum(const double* W, const double* dy, double* dx, std::size_t m,
                    std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) acc += W[i * n + j] * dy[i];
    dx[j] += acc;
  }
}

void outer_accum(const double* dy, const double* x, double* dW, std::size_t m,
                 std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double g = dy[i];
    if (g == 0.0) continue;
    double* row = dW + i * n;
    for (std::size_t j = 0; j < n; ++j) row[j] += g * x[j];
  }
}

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace serial

namespace parallel {

// Each output entry is an independent serial reduction, so the result does not
// depend on the thread count.

void matvec(const double* W, const double* x, double* y, std::size_t m, std::size_t n) {
#ifdef MAINT_HAVE_OPENMP
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(m); ++i) {
    double acc = 0.0;
    const double* row = W + static_cast<std::size_t>(i) * n;
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
#else
  serial::matvec(W, x, y, m, n);
#endif
}

void matvec_t_accum(const double* W, const double* dy, double* dx, std::size_t m,
                    std::size_t n) {
#ifdef MAINT_HAVE_OPENMP
#pragma omp parallel for schedule(static)
  for (long long j = 0; j < static_cast<long long>(n); ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) acc += W[i * n + j] * dy[i];
    dx[j] += acc;
  }
#else
  serial::matvec_t_accum(W, dy, dx, m, n);
#endif
}

void outer_accum(const double* dy, const double* x, double* dW, std::size_t m,
                 std::size_t n) {
#ifdef MAINT_HAVE_OPENMP
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(m); ++i) {
    double g = dy[i];
    if (g == 0.0) continue;
    double* row = dW + static_cast<std::size_t>(i) * n;
    for (std::size_t j = 0; j < n; ++j) row[j] += g * x[j];
  }
#else
  serial::outer_accum(dy, x, dW, m, n);
#endif
}

}  // namespace parallel

namespace {
std::atomic<bool> g_parallel{true};
// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelThreshold = 64 * 1024;
}  // namespace

void set_parallel_enabled(bool enabled) { g_parallel.store(enabled); }
bool parallel_enabled() { return g_parallel.load(); }

void matvec(const double* W, const double* x, double* y, std::size_t m, std::size_t n) {
  if (g_parallel.load() && m * n >= kParallelThreshold)
    parallel::matvec(W, x, y, m, n);
  else
    serial::matvec(W, x, y, m, n);
}

void matvec_t_accum(const double* W, const double* dy, double* dx, std::size_t m,
                    std::size_t n) {
  if (g_parallel.load() && m * n >= kParallelThreshold)
    parallel::matvec_t_accum(W, dy, dx, m, n);
  else
    serial::matvec_t_accum(W, dy, dx, m, n);
}

void outer_accum(const double* dy, const double* x, double* dW, std::size_t m,
                 std::size_t n) {
  if (g_parallel.load() && m * n >= kParallelThreshold)
    parallel::outer_accum(dy, x, dW, m, n);
  else
    serial::outer_accum(dy, x, dW, m, n);
}

}  // namespace maint::kernels
