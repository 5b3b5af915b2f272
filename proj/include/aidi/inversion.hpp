#pragma once

#include "aidi/latent.hpp"
#include "aidi/predictor.hpp"
#include "aidi/schedule.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

namespace aidi {

/// How each implicit inversion step's fixed point is iterated.
///  - Plain:  z^{i+1} = f(z^i)
///  - AidiE:  z^{i+1} = 0.5 f(z^{i-1}) + 0.5 f(z^i)
///  - AidiA:  Anderson mixing over the last min(window, i) + 1 iterates
enum class FixedPointVariant { Plain, AidiE, AidiA };

struct FixedPointConfig {
    FixedPointVariant variant = FixedPointVariant::AidiE;
    int iters = 6;
    int window = 2;             // AidiA only
    double residual_tol = 0.0;  // 0 runs all `iters` iterations
    double ridge = 1e-10;

    void validate() const;
};

/// Inversion methods compared by the benchmark. Euler is the explicit
/// baseline; the others solve the implicit step with FixedPointConfig.
enum class InversionMethod { Euler, Plain, AidiE, AidiA };

std::string_view to_string(InversionMethod m);
InversionMethod parse_method(std::string_view s);

/// Fixed-point configuration for a method (nullopt for Euler), with the
/// iteration budget and window filled in.
std::optional<FixedPointConfig> fixed_point_config(InversionMethod m, int iters, int window = 2);

/// Per-step iteration budget used when none is given: 11, 6 and 5 for 10,
/// 20 and 50 steps; 6 otherwise.
int default_iterations(int n_steps);

/// Coefficients of f(z) = ratio * z_prev + bracket * eps(z, t).
struct ImplicitCoeffs {
    double ratio;    // sqrt(abar_t / abar_prev)
    double bracket;  // sqrt(1 - abar_t) - sqrt((1 - abar_prev) abar_t / abar_prev)
};

ImplicitCoeffs implicit_coefficients(const NoiseSchedule& schedule, int t, int t_prev);

/// Explicit baseline: approximates eps at z_t using the time argument t_next.
Latent euler_invert_step(const NoiseSchedule& schedule, const NoisePredictor& pred, const Latent& z_t, int t,
                         int t_next, PromptId cond, double omega);

/// The implicit map whose fixed point z reproduces z_prev under ddim_step.
Latent implicit_f(const NoiseSchedule& schedule, const NoisePredictor& pred, const Latent& z_candidate,
                  const Latent& z_prev, int t, int t_prev, PromptId cond, double omega);

/// Anderson weights: argmin ||sum_j gamma_j g_j|| subject to sum_j gamma_j = 1,
/// solved by eliminating the last weight and a ridge-regularised normal
/// equation (ridge scaled by the largest diagonal entry). Degenerate systems
/// return (0, ..., 0, 1).
std::vector<double> anderson_gamma(std::span<const Latent> residuals, double ridge);

struct StepResult {
    Latent z;
    /// residuals[k] = ||f(z^{k+1}) - z^{k+1}|| for each iterate produced.
    std::vector<double> residuals;
    int f_evals = 0;
};

/// Solves for z_t given z_prev. Starts from z^0 = z_prev, z^1 = f(z^0) and
/// returns z^I (or the first iterate whose residual is <= residual_tol).
/// Every returned iterate has its residual measured, so one step costs at
/// most iters + 1 evaluations of f.
StepResult aidi_invert_step(const NoiseSchedule& schedule, const NoisePredictor& pred, const Latent& z_prev, int t,
                            int t_prev, PromptId cond, double omega, const FixedPointConfig& cfg);

struct StepTrace {
    int t = 0;
    std::vector<double> residuals;
};

struct InversionReport {
    std::vector<StepTrace> steps;
    std::uint64_t nfe = 0;      // predictor calls
    std::uint64_t f_evals = 0;  // implicit-map evaluations (0 for Euler)
    double wall_ms = 0.0;
    std::optional<double> round_trip_l2;
};

/// Residual trace rows, then a summary block:
///   step_t,iteration,residual_norm
///   ...
///   round_trip_l2,nfe,wall_ms
///   ...
void write_report_csv(const InversionReport& report, std::ostream& out);

struct InversionResult {
    Latent z_T;
    InversionReport report;
};

/// Inverts z_0 across the scheduled timesteps in increasing order. Uses the
/// Euler baseline when `cfg` is empty.
InversionResult invert_trajectory(const NoiseSchedule& schedule, const NoisePredictor& pred, const Latent& z0,
                                  PromptId cond, double omega, const std::optional<FixedPointConfig>& cfg);

/// max over scheduled steps of |bracket_t| * guided Lipschitz bound; below 1
/// the implicit map is a contraction at every step.
double contraction_bound(const NoiseSchedule& schedule, const NoisePredictor& pred, PromptId cond, double omega);

}  // namespace aidi
