#pragma once

#include "aidi/latent.hpp"
#include "aidi/predictor.hpp"
#include "aidi/schedule.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

namespace aidi {

/// Seeded generator for the Gaussian draws of stochastic sampling.
using Rng = std::mt19937_64;

/// Masked stochastic sampling parameters. sigma_t is the DDIM variance
/// between adjacent scheduled steps; eta is held constant across steps.
struct StochasticConfig {
    double eta = 0.0;
    std::uint64_t seed = 0;
};

/// Deterministic DDIM update from t down to t_prev (t_prev may be 0).
Latent ddim_step(const NoiseSchedule& schedule, const Latent& eps, const Latent& z_t, int t, int t_prev);

/// Forward noising sqrt(abar_t) z_0 + sqrt(1 - abar_t) noise.
Latent one_step_noise(const NoiseSchedule& schedule, const Latent& z0, int t, const Latent& noise);

/// One masked stochastic step. `mask` matches z_t elementwise (or holds one
/// value). Draws z_t.size() standard normals from `rng` on every call. With
/// eta == 0 or mask == 0 the result equals ddim_step exactly.
Latent stochastic_step(const NoiseSchedule& schedule, const Latent& eps, const Latent& z_t, int t, int t_prev,
                       const Latent& mask, const StochasticConfig& cfg, Rng& rng);

/// Per-timestep field supplier, e.g. a blended guidance scale or a soft mask
/// already broadcast to the latent's shape.
using FieldProvider = std::function<Latent(int t)>;

struct SampleOptions {
    PromptId cond = PromptId::Source;
    double omega = 1.0;
    /// When set, replaces the scalar omega by a per-element guidance scale.
    FieldProvider scale_field;
    /// When set, steps are stochastic.
    std::optional<StochasticConfig> stochastic;
    /// Mask for stochastic steps; all-ones when unset.
    FieldProvider mask;
};

/// Runs the scheduled steps from T down to 0. Returns every state, starting
/// with z_T and ending with z_0 (n_steps + 1 entries).
std::vector<Latent> sample_trajectory(const NoiseSchedule& schedule, const NoisePredictor& pred, const Latent& z_T,
                                      const SampleOptions& opts);

}  // namespace aidi
