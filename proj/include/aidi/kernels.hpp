#pragma once

// Data-parallel inner loops shared by the sampler, the inversion solvers and
// the toy predictors. Every kernel has a scalar reference implementation; an
// AVX2 variant is selected at runtime when the CPU supports it.
//
// Elementwise kernels are bit-identical across variants (no FMA, same
// operation order per element). Reductions (dot, gemv) reassociate and only
// agree to rounding.

#include <cstddef>
#include <string_view>

namespace aidi::kernels {

enum class Isa { Scalar, Avx2 };

/// Precomputed square roots for one DDIM step from t to t_prev.
struct DdimCoeffs {
    double sqrt_ab_t;            // sqrt(abar_t)
    double sqrt_one_minus_ab_t;  // sqrt(1 - abar_t)
    double sqrt_ab_prev;         // sqrt(abar_prev)
    double sqrt_one_minus_ab_prev;
    double one_minus_ab_prev;    // 1 - abar_prev, used by the masked variant
};

struct KernelTable {
    Isa isa;
    std::string_view name;

    // out[k] = a * x[k] + b * y[k]
    void (*lincomb)(double a, const double* x, double b, const double* y, double* out, std::size_t n);
    // out[k] = w[k] * x[k] + (1 - w[k]) * y[k]
    void (*blend)(const double* w, const double* x, const double* y, double* out, std::size_t n);
    // y[k] += a * x[k]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // out[k] = a * x[k]
    void (*scale)(double a, const double* x, double* out, std::size_t n);
    // z0 = (z - s1 * eps) / sa;  out = sp * z0 + sq * eps
    void (*ddim)(const DdimCoeffs& c, const double* z, const double* eps, double* out, std::size_t n);
    // var = eta_sigma2 * mask[k]
    // out = sp * z0 + sqrt(1 - abar_prev - var) * eps + sqrt(var) * noise[k]
    void (*ddim_masked)(const DdimCoeffs& c, double eta_sigma2, const double* mask, const double* noise,
                        const double* z, const double* eps, double* out, std::size_t n);
    double (*dot)(const double* x, const double* y, std::size_t n);
    // y = A x, A row-major rows x cols
    void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
};

const KernelTable& scalar_table();

/// nullptr when the variant was not compiled in.
const KernelTable* avx2_table();

/// True when the variant is compiled in and the running CPU supports it.
bool isa_available(Isa isa);

/// Table for an explicit ISA; throws ConfigError when unavailable.
const KernelTable& table(Isa isa);

/// The process-wide table. Chosen once: the best available ISA, unless the
/// AIDI_KERNELS environment variable is set to "scalar" or "avx2".
const KernelTable& active();

}  // namespace aidi::kernels
