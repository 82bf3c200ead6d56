#include "acqlab/kernels.hpp"

#include <cstdlib>
#include <cstring>

#if defined(__aarch64__)
#include <arm_neon.h>
#endif

namespace acqlab::kernels {

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sum_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

#if defined(__x86_64__)
// definitions in kernels_avx2.cpp (compiled with -mavx2 -mfma)
double dot_avx2(const double* x, const double* y, std::size_t n);
void axpy_avx2(double a, const double* x, double* y, std::size_t n);
double sum_avx2(const double* x, std::size_t n);
#endif

#if defined(__aarch64__)
static double dot_neon(const double* x, const double* y, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) acc = vfmaq_f64(acc, vld1q_f64(x + i), vld1q_f64(y + i));
    double r = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
    for (; i < n; ++i) r += x[i] * y[i];
    return r;
}
static void axpy_neon(double a, const double* x, double* y, std::size_t n) {
    float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}
static double sum_neon(const double* x, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
    double r = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
    for (; i < n; ++i) r += x[i];
    return r;
}
#endif

namespace {

struct Dispatch {
    DotFn dot_fn = dot_scalar;
    AxpyFn axpy_fn = axpy_scalar;
    SumFn sum_fn = sum_scalar;
    const char* name = "scalar";

    Dispatch() {
        const char* force = std::getenv("ACQLAB_KERNELS");
        if (force && std::strcmp(force, "scalar") == 0) return;
#if defined(__x86_64__)
        bool want_avx2 = !force || std::strcmp(force, "avx2") == 0;
        if (want_avx2 && __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
            dot_fn = dot_avx2;
            axpy_fn = axpy_avx2;
            sum_fn = sum_avx2;
            name = "avx2";
        }
#elif defined(__aarch64__)
        bool want_neon = !force || std::strcmp(force, "neon") == 0;
        if (want_neon) {
            dot_fn = dot_neon;
            axpy_fn = axpy_neon;
            sum_fn = sum_neon;
            name = "neon";
        }
#endif
    }
};

const Dispatch& dispatch() {
    static Dispatch d;
    return d;
}

}  // namespace

double dot(const double* x, const double* y, std::size_t n) { return dispatch().dot_fn(x, y, n); }
void axpy(double a, const double* x, double* y, std::size_t n) { dispatch().axpy_fn(a, x, y, n); }
double sum(const double* x, std::size_t n) { return dispatch().sum_fn(x, n); }
const char* backend() { return dispatch().name; }

}  // namespace acqlab::kernels
