// Compiled with -mavx2 (no -mfma). Only reached after a runtime CPU check.

#include "aidi/kernels.hpp"

#include <immintrin.h>

#include <cmath>

namespace aidi::kernels {
namespace {

constexpr std::size_t kLanes = 4;

void lincomb(double a, const double* x, double b, const double* y, double* out, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    const __m256d vb = _mm256_set1_pd(b);
    std::size_t k = 0;
    for (; k + kLanes <= n; k += kLanes) {
        const __m256d ax = _mm256_mul_pd(va, _mm256_loadu_pd(x + k));
        const __m256d by = _mm256_mul_pd(vb, _mm256_loadu_pd(y + k));
        _mm256_storeu_pd(out + k, _mm256_add_pd(ax, by));
    }
    for (; k < n; ++k) out[k] = a * x[k] + b * y[k];
}

void blend(const double* w, const double* x, const double* y, double* out, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t k = 0;
    for (; k + kLanes <= n; k += kLanes) {
        const __m256d vw = _mm256_loadu_pd(w + k);
        const __m256d wx = _mm256_mul_pd(vw, _mm256_loadu_pd(x + k));
        const __m256d wy = _mm256_mul_pd(_mm256_sub_pd(one, vw), _mm256_loadu_pd(y + k));
        _mm256_storeu_pd(out + k, _mm256_add_pd(wx, wy));
    }
    for (; k < n; ++k) out[k] = w[k] * x[k] + (1.0 - w[k]) * y[k];
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t k = 0;
    for (; k + kLanes <= n; k += kLanes) {
        const __m256d ax = _mm256_mul_pd(va, _mm256_loadu_pd(x + k));
        _mm256_storeu_pd(y + k, _mm256_add_pd(_mm256_loadu_pd(y + k), ax));
    }
    for (; k < n; ++k) y[k] += a * x[k];
}

void scale(double a, const double* x, double* out, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t k = 0;
    for (; k + kLanes <= n; k += kLanes) _mm256_storeu_pd(out + k, _mm256_mul_pd(va, _mm256_loadu_pd(x + k)));
    for (; k < n; ++k) out[k] = a * x[k];
}

void ddim(const DdimCoeffs& c, const double* z, const double* eps, double* out, std::size_t n) {
    const __m256d s1 = _mm256_set1_pd(c.sqrt_one_minus_ab_t);
    const __m256d sa = _mm256_set1_pd(c.sqrt_ab_t);
    const __m256d sp = _mm256_set1_pd(c.sqrt_ab_prev);
    const __m256d sq = _mm256_set1_pd(c.sqrt_one_minus_ab_prev);
    std::size_t k = 0;
    for (; k + kLanes <= n; k += kLanes) {
        const __m256d e = _mm256_loadu_pd(eps + k);
        const __m256d z0 = _mm256_div_pd(_mm256_sub_pd(_mm256_loadu_pd(z + k), _mm256_mul_pd(s1, e)), sa);
        _mm256_storeu_pd(out + k, _mm256_add_pd(_mm256_mul_pd(sp, z0), _mm256_mul_pd(sq, e)));
    }
    for (; k < n; ++k) {
        const double z0 = (z[k] - c.sqrt_one_minus_ab_t * eps[k]) / c.sqrt_ab_t;
        out[k] = c.sqrt_ab_prev * z0 + c.sqrt_one_minus_ab_prev * eps[k];
    }
}

void ddim_masked(const DdimCoeffs& c, double eta_sigma2, const double* mask, const double* noise,
                 const double* z, const double* eps, double* out, std::size_t n) {
    const __m256d s1 = _mm256_set1_pd(c.sqrt_one_minus_ab_t);
    const __m256d sa = _mm256_set1_pd(c.sqrt_ab_t);
    const __m256d sp = _mm256_set1_pd(c.sqrt_ab_prev);
    const __m256d om = _mm256_set1_pd(c.one_minus_ab_prev);
    const __m256d es = _mm256_set1_pd(eta_sigma2);
    std::size_t k = 0;
    for (; k + kLanes <= n; k += kLanes) {
        const __m256d var = _mm256_mul_pd(es, _mm256_loadu_pd(mask + k));
        const __m256d e = _mm256_loadu_pd(eps + k);
        const __m256d z0 = _mm256_div_pd(_mm256_sub_pd(_mm256_loadu_pd(z + k), _mm256_mul_pd(s1, e)), sa);
        const __m256d mean = _mm256_add_pd(_mm256_mul_pd(sp, z0), _mm256_mul_pd(_mm256_sqrt_pd(_mm256_sub_pd(om, var)), e));
        const __m256d jitter = _mm256_mul_pd(_mm256_sqrt_pd(var), _mm256_loadu_pd(noise + k));
        _mm256_storeu_pd(out + k, _mm256_add_pd(mean, jitter));
    }
    for (; k < n; ++k) {
        const double var = eta_sigma2 * mask[k];
        const double z0 = (z[k] - c.sqrt_one_minus_ab_t * eps[k]) / c.sqrt_ab_t;
        out[k] = c.sqrt_ab_prev * z0 + std::sqrt(c.one_minus_ab_prev - var) * eps[k];
        out[k] = out[k] + std::sqrt(var) * noise[k];
    }
}

double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(const double* x, const double* y, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t k = 0;
    for (; k + 2 * kLanes <= n; k += 2 * kLanes) {
        acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k)));
        acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(_mm256_loadu_pd(x + k + kLanes), _mm256_loadu_pd(y + k + kLanes)));
    }
    for (; k + kLanes <= n; k += kLanes)
        acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k)));
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; k < n; ++k) acc += x[k] * y[k];
    return acc;
}

void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = dot(a + r * cols, x, cols);
}

}  // namespace

const KernelTable* avx2_table() {
    static const KernelTable t{Isa::Avx2, "avx2", lincomb, blend, axpy, scale, ddim, ddim_masked, dot, gemv};
    return &t;
}

}  // namespace aidi::kernels
