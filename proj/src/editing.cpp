#include "aidi/editing.hpp"

#include "aidi/csv.hpp"
#include "aidi/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace aidi {

AttentionSource centered_blob_source(std::size_t rows, std::size_t cols, double sigma) {
    AttentionMap map = synthetic_attention(rows, cols, 0.5 * static_cast<double>(rows - 1),
                                           0.5 * static_cast<double>(cols - 1), sigma);
    return fixed_source(std::move(map));
}

AttentionSource fixed_source(AttentionMap map) {
    map.validate();
    return [map = std::move(map)](int) { return map; };
}

void EditConfig::validate() const {
    if (!(omega >= 0.0) || !(omega_e >= omega)) throw ConfigError("edit config: need omega_e >= omega >= 0");
    if (n_candidates < 1) throw ConfigError("edit config: n_candidates must be >= 1");
    if (!(stochastic.eta >= 0.0)) throw ConfigError("edit config: eta must be >= 0");
    mask.validate();
    if (fixed_point) fixed_point->validate();
}

double default_scorer(const Latent& candidate, const Latent& reference) {
    require_same_shape(candidate, reference, "default_scorer");
    return relative_l2(candidate, reference);
}

namespace {

std::vector<SoftMask> mask_stream(const NoiseSchedule& schedule, const Shape& shape, const EditConfig& cfg) {
    AttentionSource source = cfg.attention;
    if (!source) {
        const auto [h, w] = spatial_dims(shape);
        source = centered_blob_source(h, w, 0.25 * static_cast<double>(std::max(h, w)));
    }
    std::vector<SoftMask> masks;
    masks.reserve(schedule.n_steps());
    for (int t : schedule.timesteps()) masks.push_back(soft_mask(normalize_map(source(t), cfg.mask), cfg.mask.polarity));
    return masks;
}

std::size_t step_index(const NoiseSchedule& schedule, int t) {
    const auto ts = schedule.timesteps();
    const auto it = std::lower_bound(ts.begin(), ts.end(), t);
    if (it == ts.end() || *it != t) throw ConfigError("timestep " + std::to_string(t) + " is not scheduled");
    return static_cast<std::size_t>(it - ts.begin());
}

}  // namespace

ReconstructResult reconstruct(const NoiseSchedule& schedule, const NoisePredictor& pred, const Latent& z0,
                              PromptId source, const EditConfig& cfg) {
    cfg.validate();
    ReconstructResult out;
    auto inv = invert_trajectory(schedule, pred, z0, source, cfg.omega, cfg.fixed_point);
    out.z_T = std::move(inv.z_T);
    out.report = std::move(inv.report);

    const CountingPredictor counted(pred);
    SampleOptions opts;
    opts.cond = source;
    opts.omega = cfg.omega;
    auto states = sample_trajectory(schedule, counted, out.z_T, opts);
    out.sampling_nfe = counted.calls();
    out.z0_rec = std::move(states.back());
    out.report.round_trip_l2 = relative_l2(out.z0_rec, z0);
    out.masks = mask_stream(schedule, z0.shape(), cfg);
    return out;
}

std::uint64_t candidate_seed(std::uint64_t base, std::size_t k) {
    // splitmix64 finaliser over (base, k)
    std::uint64_t x = base + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(k) + 1);
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

EditResult edit(const NoiseSchedule& schedule, const NoisePredictor& pred, const Latent& z0, PromptId source,
                PromptId target, const EditConfig& cfg, const Scorer& scorer) {
    cfg.validate();
    if (target == PromptId::Null) throw ConfigError("edit: target prompt must not be null");
    EditResult result;
    result.reconstruction = reconstruct(schedule, pred, z0, source, cfg);
    result.inversion_nfe = result.reconstruction.report.nfe;

    const auto& masks = result.reconstruction.masks;
    const Shape& shape = z0.shape();
    std::vector<Latent> fields, mask_fields;
    fields.reserve(masks.size());
    mask_fields.reserve(masks.size());
    for (const auto& m : masks) {
        fields.push_back(broadcast_to_latent(blended_scale_field(m, cfg.omega, cfg.omega_e), shape));
        mask_fields.push_back(broadcast_to_latent(m.grid, shape));
    }

    const CountingPredictor counted(pred);
    SampleOptions opts;
    opts.cond = target;
    opts.scale_field = [&](int t) { return fields[step_index(schedule, t)]; };
    const bool stochastic = cfg.stochastic.eta > 0.0;
    if (stochastic) opts.mask = [&](int t) { return mask_fields[step_index(schedule, t)]; };

    const auto n = static_cast<std::size_t>(cfg.n_candidates);
    for (std::size_t k = 0; k < n; ++k) {
        if (!stochastic && k > 0) {
            result.candidates.push_back(result.candidates.front());
            continue;
        }
        if (stochastic) opts.stochastic = StochasticConfig{cfg.stochastic.eta, candidate_seed(cfg.stochastic.seed, k)};
        auto states = sample_trajectory(schedule, counted, result.reconstruction.z_T, opts);
        result.candidates.push_back(std::move(states.back()));
    }
    result.edit_nfe = counted.calls();

    result.ranking.resize(n);
    std::iota(result.ranking.begin(), result.ranking.end(), std::size_t{0});
    result.scores.assign(n, std::numeric_limits<double>::quiet_NaN());
    try {
        for (std::size_t k = 0; k < n; ++k) {
            result.scores[k] = scorer(result.candidates[k], z0);
            if (!std::isfinite(result.scores[k])) throw NumericError("non-finite score");
        }
        std::stable_sort(result.ranking.begin(), result.ranking.end(),
                         [&](std::size_t a, std::size_t b) { return result.scores[a] < result.scores[b]; });
    } catch (const std::exception&) {
        result.scorer_failed = true;
        std::iota(result.ranking.begin(), result.ranking.end(), std::size_t{0});
    }
    return result;
}

void write_scores_csv(const EditResult& result, std::ostream& out) {
    std::vector<std::size_t> rank(result.candidates.size());
    for (std::size_t r = 0; r < result.ranking.size(); ++r) rank[result.ranking[r]] = r + 1;
    out << "candidate,score,rank\n";
    for (std::size_t k = 0; k < result.candidates.size(); ++k)
        out << k << ',' << format_real(result.scores[k]) << ',' << rank[k] << '\n';
}

}  // namespace aidi
