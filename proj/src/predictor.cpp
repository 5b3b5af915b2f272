#include "aidi/predictor.hpp"

#include "aidi/error.hpp"
#include "aidi/kernels.hpp"

#include <cmath>
#include <random>

namespace aidi {

std::string_view to_string(PromptId p) {
    switch (p) {
        case PromptId::Null: return "null";
        case PromptId::Source: return "source";
        case PromptId::Target: return "target";
    }
    return "?";
}

PromptId parse_prompt(std::string_view s) {
    if (s == "null") return PromptId::Null;
    if (s == "source") return PromptId::Source;
    if (s == "target") return PromptId::Target;
    throw ConfigError("unknown prompt '" + std::string(s) + "' (expected null, source or target)");
}

DenseMatrix::DenseMatrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c) throw ConfigError("matrix data does not match its dimensions");
}

DenseMatrix DenseMatrix::identity(std::size_t n, double diag) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = diag;
    return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> diag) {
    DenseMatrix m(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
    return m;
}

double spectral_norm(const DenseMatrix& a, int max_iters, double rel_tol) {
    if (a.rows == 0 || a.cols == 0) return 0.0;
    const auto& k = kernels::active();
    // Deterministic start that is unlikely to be orthogonal to the top singular vector.
    std::vector<double> v(a.cols), av(a.rows), w(a.cols);
    for (std::size_t i = 0; i < a.cols; ++i) v[i] = 1.0 + 0.01 * static_cast<double>(i % 7);
    double sigma = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        const double vn = std::sqrt(k.dot(v.data(), v.data(), v.size()));
        if (vn == 0.0) return 0.0;
        k.scale(1.0 / vn, v.data(), v.data(), v.size());
        k.gemv(a.data.data(), a.rows, a.cols, v.data(), av.data());
        // w = A^T (A v)
        std::fill(w.begin(), w.end(), 0.0);
        for (std::size_t r = 0; r < a.rows; ++r) k.axpy(av[r], a.data.data() + r * a.cols, w.data(), a.cols);
        const double next = std::sqrt(std::sqrt(k.dot(w.data(), w.data(), w.size())));
        v.swap(w);
        if (it > 0 && std::abs(next - sigma) <= rel_tol * next) return next;
        sigma = next;
    }
    return sigma;
}

Latent NoisePredictor::predict(const Latent& z, PromptId prompt, int t) const {
    if (dim() != 0 && z.size() != dim())
        throw ConfigError("predictor expects " + std::to_string(dim()) + " values, got " + std::to_string(z.size()));
    Latent out(z.shape());
    predict_into(z.values(), prompt, t, out.values());
    return out;
}

void ZeroPredictor::predict_into(std::span<const double>, PromptId, int, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
}

void ConstantPredictor::predict_into(std::span<const double>, PromptId prompt, int, std::span<double> out) const {
    std::fill(out.begin(), out.end(), values_[index(prompt)]);
}

AffinePredictor::AffinePredictor(std::array<DenseMatrix, 3> a, std::array<std::vector<double>, 3> b,
                                 double declared_bound)
    : a_(std::move(a)), b_(std::move(b)) {
    const std::size_t n = a_[0].cols;
    if (n == 0) throw ConfigError("affine predictor needs a nonempty matrix");
    for (std::size_t p = 0; p < 3; ++p) {
        if (a_[p].rows != n || a_[p].cols != n) throw ConfigError("affine predictor matrices must be square and equal-sized");
        if (b_[p].empty()) b_[p].assign(n, 0.0);
        if (b_[p].size() != n) throw ConfigError("affine predictor offset has wrong length");
    }
    for (std::size_t p = 0; p < 3; ++p) {
        if (declared_bound < 0.0) {
            bounds_[p] = spectral_norm(a_[p]);
        } else {
            if (n <= kVerifyDim) {
                const double actual = spectral_norm(a_[p]);
                if (actual > declared_bound * (1.0 + 1e-9) + 1e-15)
                    throw ConfigError("affine predictor: ||A_" + std::string(to_string(kAllPrompts[p])) + "|| = " +
                                      std::to_string(actual) + " exceeds declared bound " +
                                      std::to_string(declared_bound));
            }
            bounds_[p] = declared_bound;
        }
    }
}

void AffinePredictor::predict_into(std::span<const double> z, PromptId prompt, int, std::span<double> out) const {
    const auto& m = a_[index(prompt)];
    const auto& b = b_[index(prompt)];
    kernels::active().gemv(m.data.data(), m.rows, m.cols, z.data(), out.data());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
}

ContractiveNonlinearPredictor::ContractiveNonlinearPredictor(double scale, std::array<DenseMatrix, 3> w)
    : scale_(scale), w_(std::move(w)) {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("contractive predictor: scale must be positive");
    const std::size_t n = w_[0].cols;
    if (n == 0) throw ConfigError("contractive predictor needs a nonempty matrix");
    for (std::size_t p = 0; p < 3; ++p) {
        if (w_[p].rows != n || w_[p].cols != n) throw ConfigError("contractive predictor matrices must be square and equal-sized");
        norms_[p] = spectral_norm(w_[p]);
        if (!(scale_ * norms_[p] < 1.0))
            throw ConfigError("contractive predictor: s*||W_" + std::string(to_string(kAllPrompts[p])) + "|| = " +
                              std::to_string(scale_ * norms_[p]) + " is not < 1");
    }
}

void ContractiveNonlinearPredictor::predict_into(std::span<const double> z, PromptId prompt, int,
                                                 std::span<double> out) const {
    const auto& m = w_[index(prompt)];
    kernels::active().gemv(m.data.data(), m.rows, m.cols, z.data(), out.data());
    for (double& v : out) v = scale_ * std::tanh(v);
}

std::unique_ptr<ContractiveNonlinearPredictor> make_contractive_predictor(const ContractiveOptions& opts) {
    if (opts.dim == 0) throw ConfigError("contractive predictor: dim must be positive");
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::array<DenseMatrix, 3> w;
    for (std::size_t p = 0; p < 3; ++p) {
        DenseMatrix m(opts.dim, opts.dim);
        for (double& v : m.data) v = normal(rng);
        const double norm = spectral_norm(m);
        for (double& v : m.data) v *= opts.gains[p] / norm;
        w[p] = std::move(m);
    }
    return std::make_unique<ContractiveNonlinearPredictor>(opts.scale, std::move(w));
}

Latent guided_epsilon(const NoisePredictor& pred, const Latent& z, PromptId cond, double omega, int t) {
    if (cond == PromptId::Null) throw ConfigError("guided_epsilon: conditioning prompt must not be null");
    const Latent e_cond = pred.predict(z, cond, t);
    const Latent e_null = pred.predict(z, PromptId::Null, t);
    require_same_shape(e_cond, e_null, "guided_epsilon");
    Latent out(z.shape());
    kernels::active().lincomb(omega, e_cond.data(), 1.0 - omega, e_null.data(), out.data(), out.size());
    return out;
}

Latent blended_epsilon(const NoisePredictor& pred, const Latent& z, PromptId cond, const Latent& scale_field, int t) {
    if (cond == PromptId::Null) throw ConfigError("blended_epsilon: conditioning prompt must not be null");
    if (scale_field.size() != 1 && scale_field.size() != z.size())
        throw ConfigError("blended_epsilon: scale field " + shape_to_string(scale_field.shape()) +
                          " cannot broadcast to " + shape_to_string(z.shape()));
    if (scale_field.size() == 1 && z.size() != 1) return guided_epsilon(pred, z, cond, scale_field[0], t);
    const Latent e_cond = pred.predict(z, cond, t);
    const Latent e_null = pred.predict(z, PromptId::Null, t);
    require_same_shape(e_cond, e_null, "blended_epsilon");
    Latent out(z.shape());
    kernels::active().blend(scale_field.data(), e_cond.data(), e_null.data(), out.data(), out.size());
    return out;
}

double guided_lipschitz(const NoisePredictor& pred, PromptId cond, double omega) {
    return std::abs(omega) * pred.lipschitz(cond) + std::abs(1.0 - omega) * pred.lipschitz(PromptId::Null);
}

}  // namespace aidi
