#pragma once

#include "aidi/inversion.hpp"
#include "aidi/latent.hpp"
#include "aidi/predictor.hpp"
#include "aidi/schedule.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <vector>

namespace aidi {

/// Shape of the latent used by the benchmark and CLI when no input is given.
inline const Shape kDefaultLatentShape{1, 8, 8};

/// Standard-normal latent drawn from `seed`.
Latent random_latent(const Shape& shape, std::uint64_t seed);

/// The benchmark's ContractiveNonlinear predictor for a latent of `dim`
/// elements, seeded from `seed`.
std::unique_ptr<ContractiveNonlinearPredictor> default_bench_predictor(std::size_t dim, std::uint64_t seed);

/// Peak signal-to-noise ratio in dB with the reference's value range as peak,
/// capped at 400 dB so exact reconstructions stay finite.
double psnr(const Latent& reconstruction, const Latent& reference);

struct ExperimentGrid {
    std::vector<int> step_counts{10, 20, 50};
    std::vector<double> omegas{0.0, 1.0, 3.0, 5.0, 7.0};
    std::vector<InversionMethod> methods{InversionMethod::Euler, InversionMethod::Plain, InversionMethod::AidiE,
                                         InversionMethod::AidiA};
    /// Defaults to default_bench_predictor(shape_size(latent_shape), seed).
    std::shared_ptr<const NoisePredictor> predictor;
    /// Defaults to build_schedule().
    std::optional<NoiseSchedule> schedule;
    /// Defaults to random_latent(latent_shape, seed + 1).
    std::optional<Latent> z0;
    Shape latent_shape = kDefaultLatentShape;
    std::uint64_t seed = 0;
    /// Fixed-point budget per step; default_iterations(steps) when unset.
    std::optional<int> iters;
    int window = 2;
    /// wall_ms is written as 0 unless timing is requested, so the CSV is
    /// byte-deterministic by default.
    bool record_timing = false;

    void validate() const;
};

struct GridRow {
    InversionMethod method;
    int steps;
    double omega;
    double round_trip_relative_l2;
    double psnr;
    std::uint64_t nfe;
    double wall_ms;
    std::uint64_t seed;
};

/// One row per (method, steps, omega), in that nesting order. Each cell
/// inverts z0 under the source prompt and samples it back.
std::vector<GridRow> run_grid(const ExperimentGrid& grid);

/// method,steps,omega,round_trip_relative_l2,psnr,nfe,wall_ms,seed
void write_grid_csv(const std::vector<GridRow>& rows, std::ostream& out);

}  // namespace aidi
