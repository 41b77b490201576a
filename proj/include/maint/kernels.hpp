#pragma once

#include <cstddef>

namespace maint::kernels {

// Dense kernels behind the autograd ops. Each kernel exists in a serial
// reference form and an OpenMP form that partitions independent output
// entries across threads, so both produce bit-identical results.

namespace serial {

// y = W x, W is m x n row-major.
void matvec(const double* W, const double* x, double* y, std::size_t m, std::size_t n);

// dx += W^T dy.
void matvec_t_accum(const double* W, const double* dy, double* dx, std::size_t m,
                    std::size_t n);

// dW += dy x^T (outer product accumulate).
void outer_accum(const double* dy, const double* x, double* dW, std::size_t m,
                 std::size_t n);

double dot(const double* a, const double* b, std::size_t n);

}  // namespace serial

namespace parallel {

void matvec(const double* W, const double* x, double* y, std::size_t m, std::size_t n);
void matvec_t_accum(const double* W, const double* dy, double* dx, std::size_t m,
                    std::size_t n);
void outer_accum(const double* dy, const double* x, double* dW, std::size_t m,
                 std::size_t n);

}  // namespace parallel

// Process-wide switch. Parallel kernels only engage above a work threshold;
// below it they fall through to the serial forms.
void set_parallel_enabled(bool enabled);
bool parallel_enabled();

void matvec(const double* W, const double* x, double* y, std::size_t m, std::size_t n);
void matvec_t_accum(const double* W, const double* dy, double* dx, std::size_t m,
                    std::size_t n);
void outer_accum(const double* dy, const double* x, double* dW, std::size_t m,
                 std::size_t n);

}  // namespace maint::kernels
