#include "aidi/bench.hpp"

#include "aidi/csv.hpp"
#include "aidi/error.hpp"
#include "aidi/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace aidi {

Latent random_latent(const Shape& shape, std::uint64_t seed) {
    Latent z(shape);
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : z.values()) v = normal(rng);
    return z;
}

std::unique_ptr<ContractiveNonlinearPredictor> default_bench_predictor(std::size_t dim, std::uint64_t seed) {
    ContractiveOptions opts;
    opts.dim = dim;
    opts.seed = seed;
    auto pred = make_contractive_predictor(opts);
    const double bound = contraction_bound(subsample(build_schedule(), 20), *pred, PromptId::Source, 1.0);
    if (!(bound < 0.9))
        throw ConfigError("default predictor: implicit-map contraction bound " + format_real(bound) +
                          " at 20 steps is not < 0.9");
    return pred;
}

double psnr(const Latent& reconstruction, const Latent& reference) {
    require_same_shape(reconstruction, reference, "psnr");
    const auto [lo, hi] = std::minmax_element(reference.values().begin(), reference.values().end());
    const double peak = std::max(*hi - *lo, 1e-300);
    const double dist = l2_distance(reconstruction, reference);
    const double mse = dist * dist / static_cast<double>(reference.size());
    const double floor = peak * peak * 1e-40;
    return 10.0 * std::log10(peak * peak / std::max(mse, floor));
}

void ExperimentGrid::validate() const {
    if (step_counts.empty() || omegas.empty() || methods.empty()) throw ConfigError("grid axes must be nonempty");
    for (int s : step_counts)
        if (s < 1) throw ConfigError("grid step counts must be >= 1");
    for (double w : omegas)
        if (!std::isfinite(w)) throw ConfigError("grid guidance scales must be finite");
    if (iters && *iters < 1) throw ConfigError("grid iterations must be >= 1");
    if (window < 1) throw ConfigError("grid window must be >= 1");
}

std::vector<GridRow> run_grid(const ExperimentGrid& grid) {
    grid.validate();
    const NoiseSchedule base = grid.schedule ? *grid.schedule : build_schedule();
    const Latent z0 = grid.z0 ? *grid.z0 : random_latent(grid.latent_shape, grid.seed + 1);
    std::shared_ptr<const NoisePredictor> pred = grid.predictor;
    if (!pred) pred = default_bench_predictor(z0.size(), grid.seed);

    std::vector<GridRow> rows;
    rows.reserve(grid.methods.size() * grid.step_counts.size() * grid.omegas.size());
    for (auto method : grid.methods) {
        for (int steps : grid.step_counts) {
            const NoiseSchedule schedule = subsample(base, steps);
            const auto cfg = fixed_point_config(method, grid.iters.value_or(default_iterations(steps)), grid.window);
            for (double omega : grid.omegas) {
                const auto start = std::chrono::steady_clock::now();
                const CountingPredictor counted(*pred);
                const auto inv = invert_trajectory(schedule, counted, z0, PromptId::Source, omega, cfg);
                SampleOptions opts;
                opts.cond = PromptId::Source;
                opts.omega = omega;
                const Latent rec = sample_trajectory(schedule, counted, inv.z_T, opts).back();
                const double ms =
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
                GridRow row{method,     steps,          omega, relative_l2(rec, z0), psnr(rec, z0), counted.calls(),
                            grid.record_timing ? ms : 0.0, grid.seed};
                if (!std::isfinite(row.round_trip_relative_l2) || !std::isfinite(row.psnr))
                    throw NumericError("grid cell " + std::string(to_string(method)) + "/" + std::to_string(steps) +
                                       "/" + format_real(omega) + " produced non-finite metrics");
                rows.push_back(row);
            }
        }
    }
    return rows;
}

void write_grid_csv(const std::vector<GridRow>& rows, std::ostream& out) {
    out << "method,steps,omega,round_trip_relative_l2,psnr,nfe,wall_ms,seed\n";
    for (const auto& r : rows) {
        out << to_string(r.method) << ',' << r.steps << ',' << format_real(r.omega) << ','
            << format_real(r.round_trip_relative_l2) << ',' << format_real(r.psnr) << ',' << r.nfe << ','
            << format_real(r.wall_ms) << ',' << r.seed << '\n';
    }
}

}  // namespace aidi
