#include "aidi/inversion.hpp"

#include "aidi/csv.hpp"
#include "aidi/error.hpp"
#include "aidi/kernels.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <string>

namespace aidi {

void FixedPointConfig::validate() const {
    if (iters < 1) throw ConfigError("fixed-point iterations must be >= 1");
    if (window < 1) throw ConfigError("Anderson window must be >= 1");
    if (!(residual_tol >= 0.0)) throw ConfigError("residual tolerance must be >= 0");
    if (!(ridge >= 0.0)) throw ConfigError("ridge must be >= 0");
}

std::string_view to_string(InversionMethod m) {
    switch (m) {
        case InversionMethod::Euler: return "euler";
        case InversionMethod::Plain: return "plain";
        case InversionMethod::AidiE: return "aidi_e";
        case InversionMethod::AidiA: return "aidi_a";
    }
    return "?";
}

InversionMethod parse_method(std::string_view s) {
    if (s == "euler") return InversionMethod::Euler;
    if (s == "plain") return InversionMethod::Plain;
    if (s == "aidi_e" || s == "AIDI_E") return InversionMethod::AidiE;
    if (s == "aidi_a" || s == "AIDI_A") return InversionMethod::AidiA;
    throw ConfigError("unknown method '" + std::string(s) + "' (expected euler, plain, aidi_e or aidi_a)");
}

std::optional<FixedPointConfig> fixed_point_config(InversionMethod m, int iters, int window) {
    FixedPointConfig cfg;
    cfg.iters = iters;
    cfg.window = window;
    switch (m) {
        case InversionMethod::Euler: return std::nullopt;
        case InversionMethod::Plain: cfg.variant = FixedPointVariant::Plain; break;
        case InversionMethod::AidiE: cfg.variant = FixedPointVariant::AidiE; break;
        case InversionMethod::AidiA: cfg.variant = FixedPointVariant::AidiA; break;
    }
    cfg.validate();
    return cfg;
}

int default_iterations(int n_steps) {
    switch (n_steps) {
        case 10: return 11;
        case 20: return 6;
        case 50: return 5;
        default: return 6;
    }
}

ImplicitCoeffs implicit_coefficients(const NoiseSchedule& schedule, int t, int t_prev) {
    if (!(t_prev < t)) throw ConfigError("implicit_f: need t_prev < t");
    const double ab_t = schedule.alpha_bar(t);
    const double ab_prev = schedule.alpha_bar(t_prev);
    if (!(ab_prev > 0.0)) throw NumericError("implicit_f: abar_" + std::to_string(t_prev) + " is zero");
    return {std::sqrt(ab_t / ab_prev), std::sqrt(1.0 - ab_t) - std::sqrt((1.0 - ab_prev) * ab_t / ab_prev)};
}

Latent euler_invert_step(const NoiseSchedule& schedule, const NoisePredictor& pred, const Latent& z_t, int t,
                         int t_next, PromptId cond, double omega) {
    if (!(t < t_next)) throw ConfigError("euler_invert_step: need t < t_next");
    const double ab_t = schedule.alpha_bar(t);
    const double ab_next = schedule.alpha_bar(t_next);
    if (!(ab_t > 0.0)) throw NumericError("euler_invert_step: abar_" + std::to_string(t) + " is zero");
    const Latent eps = guided_epsilon(pred, z_t, cond, omega, t_next);
    const kernels::DdimCoeffs c{std::sqrt(ab_t), std::sqrt(1.0 - ab_t), std::sqrt(ab_next), std::sqrt(1.0 - ab_next),
                                1.0 - ab_next};
    Latent out(z_t.shape());
    kernels::active().ddim(c, z_t.data(), eps.data(), out.data(), out.size());
    return out;
}

Latent implicit_f(const NoiseSchedule& schedule, const NoisePredictor& pred, const Latent& z_candidate,
                  const Latent& z_prev, int t, int t_prev, PromptId cond, double omega) {
    require_same_shape(z_candidate, z_prev, "implicit_f");
    const auto c = implicit_coefficients(schedule, t, t_prev);
    const Latent eps = guided_epsilon(pred, z_candidate, cond, omega, t);
    Latent out(z_prev.shape());
    kernels::active().lincomb(c.ratio, z_prev.data(), c.bracket, eps.data(), out.data(), out.size());
    return out;
}

namespace {

// Solves (S + lambda I) x = rhs for symmetric positive semidefinite S by
// Cholesky. Returns false when a pivot is not positive.
bool cholesky_solve(std::vector<double> s, std::size_t n, std::vector<double>& rhs) {
    for (std::size_t j = 0; j < n; ++j) {
        double d = s[j * n + j];
        for (std::size_t k = 0; k < j; ++k) d -= s[j * n + k] * s[j * n + k];
        if (!(d > 0.0) || !std::isfinite(d)) return false;
        const double l = std::sqrt(d);
        s[j * n + j] = l;
        for (std::size_t i = j + 1; i < n; ++i) {
            double v = s[i * n + j];
            for (std::size_t k = 0; k < j; ++k) v -= s[i * n + k] * s[j * n + k];
            s[i * n + j] = v / l;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double v = rhs[i];
        for (std::size_t k = 0; k < i; ++k) v -= s[i * n + k] * rhs[k];
        rhs[i] = v / s[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {
        double v = rhs[i];
        for (std::size_t k = i + 1; k < n; ++k) v -= s[k * n + i] * rhs[k];
        rhs[i] = v / s[i * n + i];
    }
    for (double v : rhs)
        if (!std::isfinite(v)) return false;
    return true;
}

std::vector<double> plain_weights(std::size_t count) {
    std::vector<double> g(count, 0.0);
    g.back() = 1.0;
    return g;
}

}  // namespace

std::vector<double> anderson_gamma(std::span<const Latent> residuals, double ridge) {
    if (residuals.empty()) throw ConfigError("anderson_gamma: empty residual history");
    const std::size_t count = residuals.size();
    if (count == 1) return {1.0};

    const auto& k = kernels::active();
    const Latent& last = residuals.back();
    const std::size_t n = last.size();
    const std::size_t m = count - 1;

    // Columns d_j = g_j - g_last; minimise ||g_last + D x|| over x, then
    // gamma = (x_0, ..., x_{m-1}, 1 - sum x).
    std::vector<std::vector<double>> diffs(m, std::vector<double>(n));
    for (std::size_t j = 0; j < m; ++j) {
        require_same_shape(residuals[j], last, "anderson_gamma");
        k.lincomb(1.0, residuals[j].data(), -1.0, last.data(), diffs[j].data(), n);
    }
    std::vector<double> normal(m * m), rhs(m);
    double max_diag = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = 0; b <= a; ++b) {
            const double v = k.dot(diffs[a].data(), diffs[b].data(), n);
            normal[a * m + b] = v;
            normal[b * m + a] = v;
        }
        max_diag = std::max(max_diag, normal[a * m + a]);
        rhs[a] = -k.dot(diffs[a].data(), last.data(), n);
    }
    if (!(max_diag > 0.0) || !std::isfinite(max_diag)) return plain_weights(count);
    for (std::size_t a = 0; a < m; ++a) normal[a * m + a] += ridge * max_diag;
    if (!cholesky_solve(std::move(normal), m, rhs)) return plain_weights(count);

    std::vector<double> gamma(count);
    double partial = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        gamma[j] = rhs[j];
        partial += rhs[j];
    }
    gamma[m] = 1.0 - partial;
    return gamma;
}

StepResult aidi_invert_step(const NoiseSchedule& schedule, const NoisePredictor& pred, const Latent& z_prev, int t,
                            int t_prev, PromptId cond, double omega, const FixedPointConfig& cfg) {
    cfg.validate();
    const auto& k = kernels::active();
    const std::size_t n = z_prev.size();

    struct Iterate {
        Latent z, fz, g;
    };
    const std::size_t keep = cfg.variant == FixedPointVariant::AidiA ? static_cast<std::size_t>(cfg.window) + 1 : 2;
    std::deque<Iterate> hist;
    StepResult result;

    auto evaluate = [&](Latent z, int i) {
        Latent fz = implicit_f(schedule, pred, z, z_prev, t, t_prev, cond, omega);
        ++result.f_evals;
        if (!fz.all_finite())
            throw NumericError("fixed-point divergence at step t=" + std::to_string(t) + ", iteration " +
                               std::to_string(i));
        Latent g(z.shape());
        k.lincomb(1.0, fz.data(), -1.0, z.data(), g.data(), n);
        hist.push_back({std::move(z), std::move(fz), std::move(g)});
        if (hist.size() > keep) hist.pop_front();
    };

    evaluate(z_prev, 0);
    Latent next = hist.back().fz;  // z^1
    for (int i = 1;; ++i) {
        if (!next.all_finite())
            throw NumericError("fixed-point divergence at step t=" + std::to_string(t) + ", iteration " +
                               std::to_string(i));
        evaluate(std::move(next), i);
        const double r = l2_norm(hist.back().g);
        result.residuals.push_back(r);
        if (i == cfg.iters || (cfg.residual_tol > 0.0 && r <= cfg.residual_tol)) break;

        // z^{i+1}
        next = Latent(z_prev.shape());
        switch (cfg.variant) {
            case FixedPointVariant::Plain:
                next = hist.back().fz;
                break;
            case FixedPointVariant::AidiE: {
                const auto& older = hist[hist.size() - 2];
                k.lincomb(0.5, older.fz.data(), 0.5, hist.back().fz.data(), next.data(), n);
                break;
            }
            case FixedPointVariant::AidiA: {
                const std::size_t mi = std::min<std::size_t>(static_cast<std::size_t>(cfg.window),
                                                             static_cast<std::size_t>(i));
                const std::size_t first = hist.size() - (mi + 1);
                std::vector<Latent> gs;
                gs.reserve(mi + 1);
                for (std::size_t j = first; j < hist.size(); ++j) gs.push_back(hist[j].g);
                const auto gamma = anderson_gamma(gs, cfg.ridge);
                for (std::size_t j = 0; j <= mi; ++j) k.axpy(gamma[j], hist[first + j].fz.data(), next.data(), n);
                break;
            }
        }
    }
    result.z = hist.back().z;
    return result;
}

void write_report_csv(const InversionReport& report, std::ostream& out) {
    out << "step_t,iteration,residual_norm\n";
    for (const auto& step : report.steps)
        for (std::size_t i = 0; i < step.residuals.size(); ++i)
            out << step.t << ',' << (i + 1) << ',' << format_real(step.residuals[i]) << '\n';
    out << "round_trip_l2,nfe,wall_ms\n";
    out << (report.round_trip_l2 ? format_real(*report.round_trip_l2) : std::string("nan")) << ',' << report.nfe
        << ',' << format_real(report.wall_ms) << '\n';
}

InversionResult invert_trajectory(const NoiseSchedule& schedule, const NoisePredictor& pred, const Latent& z0,
                                  PromptId cond, double omega, const std::optional<FixedPointConfig>& cfg) {
    if (schedule.n_steps() == 0) throw ConfigError("invert_trajectory: empty timestep grid");
    if (cfg) cfg->validate();
    const auto start = std::chrono::steady_clock::now();
    const CountingPredictor counted(pred);

    InversionResult result;
    Latent z = z0;
    for (std::size_t i = 0; i < schedule.n_steps(); ++i) {
        const int t = schedule.timesteps()[i];
        const int t_prev = schedule.previous(i);
        StepTrace trace{t, {}};
        if (cfg) {
            auto step = aidi_invert_step(schedule, counted, z, t, t_prev, cond, omega, *cfg);
            z = std::move(step.z);
            trace.residuals = std::move(step.residuals);
            result.report.f_evals += static_cast<std::uint64_t>(step.f_evals);
        } else {
            z = euler_invert_step(schedule, counted, z, t_prev, t, cond, omega);
        }
        result.report.steps.push_back(std::move(trace));
    }
    result.report.nfe = counted.calls();
    result.report.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.z_T = std::move(z);
    return result;
}

double contraction_bound(const NoiseSchedule& schedule, const NoisePredictor& pred, PromptId cond, double omega) {
    const double lip = guided_lipschitz(pred, cond, omega);
    double worst = 0.0;
    for (std::size_t i = 0; i < schedule.n_steps(); ++i) {
        const auto c = implicit_coefficients(schedule, schedule.timesteps()[i], schedule.previous(i));
        worst = std::max(worst, std::abs(c.bracket) * lip);
    }
    return worst;
}

}  // namespace aidi
