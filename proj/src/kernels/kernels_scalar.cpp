#include "aidi/kernels.hpp"

#include <cmath>

namespace aidi::kernels {
namespace {

void lincomb(double a, const double* x, double b, const double* y, double* out, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) out[k] = a * x[k] + b * y[k];
}

void blend(const double* w, const double* x, const double* y, double* out, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) out[k] = w[k] * x[k] + (1.0 - w[k]) * y[k];
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) y[k] += a * x[k];
}

void scale(double a, const double* x, double* out, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) out[k] = a * x[k];
}

void ddim(const DdimCoeffs& c, const double* z, const double* eps, double* out, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
        const double z0 = (z[k] - c.sqrt_one_minus_ab_t * eps[k]) / c.sqrt_ab_t;
        out[k] = c.sqrt_ab_prev * z0 + c.sqrt_one_minus_ab_prev * eps[k];
    }
}

void ddim_masked(const DdimCoeffs& c, double eta_sigma2, const double* mask, const double* noise,
                 const double* z, const double* eps, double* out, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
        const double var = eta_sigma2 * mask[k];
        const double z0 = (z[k] - c.sqrt_one_minus_ab_t * eps[k]) / c.sqrt_ab_t;
        out[k] = c.sqrt_ab_prev * z0 + std::sqrt(c.one_minus_ab_prev - var) * eps[k];
        out[k] = out[k] + std::sqrt(var) * noise[k];
    }
}

double dot(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += x[k] * y[k];
    return acc;
}

void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = dot(a + r * cols, x, cols);
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable t{Isa::Scalar, "scalar", lincomb, blend, axpy, scale, ddim, ddim_masked, dot, gemv};
    return t;
}

}  // namespace aidi::kernels
