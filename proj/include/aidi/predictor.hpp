#pragma once

#include "aidi/latent.hpp"

#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace aidi {

/// Conditioning of a noise prediction: the null text, the source prompt p or
/// the edit target p*.
enum class PromptId { Null = 0, Source = 1, Target = 2 };

inline constexpr std::array<PromptId, 3> kAllPrompts{PromptId::Null, PromptId::Source, PromptId::Target};

std::string_view to_string(PromptId p);
PromptId parse_prompt(std::string_view s);

inline std::size_t index(PromptId p) { return static_cast<std::size_t>(p); }

/// Row-major dense matrix.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    DenseMatrix(std::size_t r, std::size_t c, std::vector<double> values);

    static DenseMatrix identity(std::size_t n, double diag = 1.0);
    static DenseMatrix diagonal(std::span<const double> diag);

    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;
};

/// Largest singular value by power iteration on A^T A.
double spectral_norm(const DenseMatrix& a, int max_iters = 500, double rel_tol = 1e-13);

/// The frozen noise model epsilon(z, prompt, t). Implementations are
/// immutable and deterministic, so concurrent calls are safe.
class NoisePredictor {
public:
    virtual ~NoisePredictor() = default;

    /// Writes epsilon(z, prompt, t) into `out` (same length as z).
    virtual void predict_into(std::span<const double> z, PromptId prompt, int t, std::span<double> out) const = 0;

    /// Declared Lipschitz bound of z -> epsilon(z, prompt, t) in the 2-norm.
    virtual double lipschitz(PromptId prompt) const = 0;

    virtual std::string_view kind() const = 0;

    /// Input dimension the predictor accepts; 0 when any length is fine.
    virtual std::size_t dim() const { return 0; }

    Latent predict(const Latent& z, PromptId prompt, int t) const;
};

/// epsilon == 0.
class ZeroPredictor final : public NoisePredictor {
public:
    void predict_into(std::span<const double> z, PromptId, int, std::span<double> out) const override;
    double lipschitz(PromptId) const override { return 0.0; }
    std::string_view kind() const override { return "zero"; }
};

/// epsilon == c_prompt everywhere, independent of z and t.
class ConstantPredictor final : public NoisePredictor {
public:
    explicit ConstantPredictor(double c) : values_{c, c, c} {}
    explicit ConstantPredictor(std::array<double, 3> per_prompt) : values_(per_prompt) {}

    void predict_into(std::span<const double> z, PromptId prompt, int, std::span<double> out) const override;
    double lipschitz(PromptId) const override { return 0.0; }
    std::string_view kind() const override { return "constant"; }
    double value(PromptId p) const { return values_[index(p)]; }

private:
    std::array<double, 3> values_;
};

/// epsilon = A_prompt z + b_prompt.
class AffinePredictor final : public NoisePredictor {
public:
    /// `declared_bound` must dominate every ||A_prompt||_2; this is verified by
    /// power iteration for dimensions up to kVerifyDim. A negative bound means
    /// "compute it".
    AffinePredictor(std::array<DenseMatrix, 3> a, std::array<std::vector<double>, 3> b, double declared_bound = -1.0);

    static constexpr std::size_t kVerifyDim = 256;

    void predict_into(std::span<const double> z, PromptId prompt, int, std::span<double> out) const override;
    double lipschitz(PromptId prompt) const override { return bounds_[index(prompt)]; }
    std::string_view kind() const override { return "affine"; }
    std::size_t dim() const override { return a_[0].cols; }

    const DenseMatrix& matrix(PromptId p) const { return a_[index(p)]; }
    const std::vector<double>& offset(PromptId p) const { return b_[index(p)]; }

private:
    std::array<DenseMatrix, 3> a_;
    std::array<std::vector<double>, 3> b_;
    std::array<double, 3> bounds_{};
};

/// epsilon = s * tanh(W_prompt z). Lipschitz bound s * ||W_prompt||_2 < 1.
class ContractiveNonlinearPredictor final : public NoisePredictor {
public:
    ContractiveNonlinearPredictor(double scale, std::array<DenseMatrix, 3> w);

    void predict_into(std::span<const double> z, PromptId prompt, int, std::span<double> out) const override;
    double lipschitz(PromptId prompt) const override { return scale_ * norms_[index(prompt)]; }
    std::string_view kind() const override { return "contractive"; }
    std::size_t dim() const override { return w_[0].cols; }

    double scale() const { return scale_; }
    const DenseMatrix& weights(PromptId p) const { return w_[index(p)]; }

private:
    double scale_;
    std::array<DenseMatrix, 3> w_;
    std::array<double, 3> norms_{};
};

/// Forwards to another predictor and counts calls.
class CountingPredictor final : public NoisePredictor {
public:
    explicit CountingPredictor(const NoisePredictor& inner) : inner_(inner) {}

    void predict_into(std::span<const double> z, PromptId prompt, int t, std::span<double> out) const override {
        calls_.fetch_add(1, std::memory_order_relaxed);
        inner_.predict_into(z, prompt, t, out);
    }
    double lipschitz(PromptId prompt) const override { return inner_.lipschitz(prompt); }
    std::string_view kind() const override { return inner_.kind(); }
    std::size_t dim() const override { return inner_.dim(); }

    std::uint64_t calls() const { return calls_.load(std::memory_order_relaxed); }
    void reset() { calls_.store(0, std::memory_order_relaxed); }

private:
    const NoisePredictor& inner_;
    mutable std::atomic<std::uint64_t> calls_{0};
};

/// Random Gaussian matrices normalised to spectral norm `gain` for each
/// prompt (gains indexed by PromptId), scaled by `scale`.
struct ContractiveOptions {
    std::size_t dim = 64;
    std::uint64_t seed = 0;
    double scale = 0.5;
    std::array<double, 3> gains{0.2, 1.0, 1.0};
};

std::unique_ptr<ContractiveNonlinearPredictor> make_contractive_predictor(const ContractiveOptions& opts);

/// Classifier-free guidance: omega * eps(z, cond, t) + (1 - omega) * eps(z, null, t).
Latent guided_epsilon(const NoisePredictor& pred, const Latent& z, PromptId cond, double omega, int t);

/// Per-element guidance: w(k) * eps_cond(k) + (1 - w(k)) * eps_null(k). The
/// field must match z's element count or hold a single value.
Latent blended_epsilon(const NoisePredictor& pred, const Latent& z, PromptId cond, const Latent& scale_field, int t);

/// Lipschitz bound of the guided prediction: |omega| L_cond + |1 - omega| L_null.
double guided_lipschitz(const NoisePredictor& pred, PromptId cond, double omega);

}  // namespace aidi
