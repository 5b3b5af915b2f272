#include "aidi/sampler.hpp"

#include "aidi/error.hpp"
#include "aidi/kernels.hpp"

#include <cmath>
#include <string>

namespace aidi {

namespace {

kernels::DdimCoeffs coefficients(const NoiseSchedule& schedule, int t, int t_prev) {
    const double ab_t = schedule.alpha_bar(t);
    const double ab_prev = schedule.alpha_bar(t_prev);
    if (!(ab_t > 0.0)) throw NumericError("ddim_step: abar_" + std::to_string(t) + " is zero");
    return {std::sqrt(ab_t), std::sqrt(1.0 - ab_t), std::sqrt(ab_prev), std::sqrt(1.0 - ab_prev), 1.0 - ab_prev};
}

void check_step_inputs(const Latent& eps, const Latent& z_t, int t, int t_prev, const char* what) {
    require_same_shape(eps, z_t, what);
    if (!(t_prev < t)) throw ConfigError(std::string(what) + ": need t_prev < t");
    if (!eps.all_finite() || !z_t.all_finite())
        throw NumericError(std::string(what) + ": non-finite input at t=" + std::to_string(t));
}

}  // namespace

Latent ddim_step(const NoiseSchedule& schedule, const Latent& eps, const Latent& z_t, int t, int t_prev) {
    check_step_inputs(eps, z_t, t, t_prev, "ddim_step");
    const auto c = coefficients(schedule, t, t_prev);
    Latent out(z_t.shape());
    kernels::active().ddim(c, z_t.data(), eps.data(), out.data(), out.size());
    return out;
}

Latent one_step_noise(const NoiseSchedule& schedule, const Latent& z0, int t, const Latent& noise) {
    require_same_shape(z0, noise, "one_step_noise");
    const double ab = schedule.alpha_bar(t);
    Latent out(z0.shape());
    kernels::active().lincomb(std::sqrt(ab), z0.data(), std::sqrt(1.0 - ab), noise.data(), out.data(), out.size());
    return out;
}

Latent stochastic_step(const NoiseSchedule& schedule, const Latent& eps, const Latent& z_t, int t, int t_prev,
                       const Latent& mask, const StochasticConfig& cfg, Rng& rng) {
    check_step_inputs(eps, z_t, t, t_prev, "stochastic_step");
    if (!(cfg.eta >= 0.0) || !std::isfinite(cfg.eta)) throw ConfigError("stochastic_step: eta must be >= 0");
    if (mask.size() != 1 && mask.size() != z_t.size())
        throw ConfigError("stochastic_step: mask " + shape_to_string(mask.shape()) + " cannot broadcast to " +
                          shape_to_string(z_t.shape()));

    const auto c = coefficients(schedule, t, t_prev);
    const double eta_sigma2 = cfg.eta * schedule.ddim_variance(t, t_prev);

    std::vector<double> mask_full;
    const double* mask_ptr = mask.data();
    if (mask.size() == 1) {
        mask_full.assign(z_t.size(), mask[0]);
        mask_ptr = mask_full.data();
    }
    for (std::size_t k = 0; k < z_t.size(); ++k) {
        const double var = eta_sigma2 * mask_ptr[k];
        if (!(var >= 0.0) || !(c.one_minus_ab_prev - var >= 0.0))
            throw ConfigError("stochastic_step: negative variance or square-root argument at step t=" +
                              std::to_string(t) + " (t_prev=" + std::to_string(t_prev) + ")");
    }

    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> noise(z_t.size());
    for (double& v : noise) v = normal(rng);

    Latent out(z_t.shape());
    kernels::active().ddim_masked(c, eta_sigma2, mask_ptr, noise.data(), z_t.data(), eps.data(), out.data(),
                                  out.size());
    return out;
}

std::vector<Latent> sample_trajectory(const NoiseSchedule& schedule, const NoisePredictor& pred, const Latent& z_T,
                                      const SampleOptions& opts) {
    if (schedule.n_steps() == 0) throw ConfigError("sample_trajectory: empty timestep grid");
    std::vector<Latent> states;
    states.reserve(schedule.n_steps() + 1);
    states.push_back(z_T);

    std::optional<Rng> rng;
    if (opts.stochastic) rng.emplace(opts.stochastic->seed);
    const Latent ones = Latent::filled(z_T.shape(), 1.0);

    for (std::size_t i = schedule.n_steps(); i-- > 0;) {
        const int t = schedule.timesteps()[i];
        const int t_prev = schedule.previous(i);
        const Latent& z = states.back();
        const Latent eps = opts.scale_field ? blended_epsilon(pred, z, opts.cond, opts.scale_field(t), t)
                                            : guided_epsilon(pred, z, opts.cond, opts.omega, t);
        if (opts.stochastic) {
            const Latent mask = opts.mask ? opts.mask(t) : ones;
            states.push_back(stochastic_step(schedule, eps, z, t, t_prev, mask, *opts.stochastic, *rng));
        } else {
            states.push_back(ddim_step(schedule, eps, z, t, t_prev));
        }
    }
    return states;
}

}  // namespace aidi
