#pragma once

#include "aidi/guidance.hpp"
#include "aidi/inversion.hpp"
#include "aidi/latent.hpp"
#include "aidi/predictor.hpp"
#include "aidi/sampler.hpp"
#include "aidi/schedule.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

namespace aidi {

/// Attention map for a scheduled timestep. Time-invariant sources ignore t.
using AttentionSource = std::function<AttentionMap(int t)>;

/// Gaussian blob centred on an h x w grid, reused at every timestep.
AttentionSource centered_blob_source(std::size_t rows, std::size_t cols, double sigma);
AttentionSource fixed_source(AttentionMap map);

struct EditConfig {
    double omega = 1.0;    // inversion / reconstruction guidance
    double omega_e = 7.0;  // editing guidance inside the mask
    MaskNormConfig mask;
    AttentionSource attention;  // centred blob over the latent grid when empty
    std::optional<FixedPointConfig> fixed_point = FixedPointConfig{};  // Euler when empty
    StochasticConfig stochastic;
    int n_candidates = 1;

    void validate() const;
};

/// Lower is better; must be pure.
using Scorer = std::function<double(const Latent& candidate, const Latent& reference)>;

/// Relative L2 distance to the reference.
double default_scorer(const Latent& candidate, const Latent& reference);

struct ReconstructResult {
    Latent z0_rec;
    Latent z_T;
    InversionReport report;
    /// One mask per scheduled timestep, aligned with schedule.timesteps().
    std::vector<SoftMask> masks;
    std::uint64_t sampling_nfe = 0;
};

/// Inverts z0 under (source, omega) and samples it back with the same
/// setting; also emits the soft mask for every scheduled step.
ReconstructResult reconstruct(const NoiseSchedule& schedule, const NoisePredictor& pred, const Latent& z0,
                              PromptId source, const EditConfig& cfg);

struct EditResult {
    std::vector<Latent> candidates;
    std::vector<double> scores;
    /// Candidate indices, best first. Candidate order when scoring failed.
    std::vector<std::size_t> ranking;
    bool scorer_failed = false;
    ReconstructResult reconstruction;
    std::uint64_t inversion_nfe = 0;
    std::uint64_t edit_nfe = 0;

    const Latent& best() const { return candidates[ranking.front()]; }
};

/// Runs inversion once, then n_candidates editing passes from the shared z_T
/// under the target prompt with the blended guidance field. With eta == 0 the
/// single deterministic candidate is repeated.
EditResult edit(const NoiseSchedule& schedule, const NoisePredictor& pred, const Latent& z0, PromptId source,
                PromptId target, const EditConfig& cfg, const Scorer& scorer = default_scorer);

/// Seed for candidate k's generator.
std::uint64_t candidate_seed(std::uint64_t base, std::size_t k);

/// candidate,score,rank
void write_scores_csv(const EditResult& result, std::ostream& out);

}  // namespace aidi
