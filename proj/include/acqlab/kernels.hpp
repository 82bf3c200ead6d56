#pragma once

#include <cstddef>

// Data-parallel inner loops used by the simplex tableau updates and the
// expected-value accumulations. Scalar reference implementations plus AVX2
// variants (NEON on aarch64), selected once at runtime. The active backend can
// be forced with ACQLAB_KERNELS=scalar|avx2|neon before first use.
namespace acqlab::kernels {

using DotFn = double (*)(const double*, const double*, std::size_t);
using AxpyFn = void (*)(double, const double*, double*, std::size_t);
using SumFn = double (*)(const double*, std::size_t);

// y[i] += a * x[i]
void axpy(double a, const double* x, double* y, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double sum(const double* x, std::size_t n);

// Name of the backend in use ("scalar", "avx2", "neon").
const char* backend();

// Reference implementations, always available (equivalence tests).
double dot_scalar(const double* x, const double* y, std::size_t n);
void axpy_scalar(double a, const double* x, double* y, std::size_t n);
double sum_scalar(const double* x, std::size_t n);

}  // namespace acqlab::kernels
