#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace aidi {

/// Cumulative noise levels abar_t for t = 0..T plus the timestep grid an
/// N-step run visits. abar_0 = 1 so the step before the first scheduled
/// timestep is always defined. Immutable after construction.
class NoiseSchedule {
public:
    /// `alpha_bar` holds abar_0..abar_T (abar_0 must be 1). The grid defaults
    /// to every timestep 1..T.
    explicit NoiseSchedule(std::vector<double> alpha_bar);
    NoiseSchedule(std::vector<double> alpha_bar, std::vector<int> timesteps);

    int big_t() const { return static_cast<int>(alpha_bar_.size()) - 1; }
    double alpha_bar(int t) const;
    std::span<const double> alpha_bars() const { return alpha_bar_; }

    /// Strictly increasing, every entry in [1, T].
    std::span<const int> timesteps() const { return timesteps_; }
    std::size_t n_steps() const { return timesteps_.size(); }

    /// Scheduled timestep before timesteps()[i]; 0 for the first entry.
    int previous(std::size_t i) const { return i == 0 ? 0 : timesteps_[i - 1]; }

    /// DDIM variance sigma_t^2 between adjacent scheduled steps t_prev < t.
    double ddim_variance(int t, int t_prev) const;

private:
    std::vector<double> alpha_bar_;
    std::vector<int> timesteps_;
};

inline constexpr int kDefaultBigT = 1000;
inline constexpr double kDefaultBetaStart = 0.00085;
inline constexpr double kDefaultBetaEnd = 0.012;

/// Scaled-linear schedule: beta_s interpolated linearly in sqrt-space from
/// beta_start (s = 1) to beta_end (s = T), abar_t = prod_{s<=t} (1 - beta_s).
NoiseSchedule build_schedule(int big_t = kDefaultBigT, double beta_start = kDefaultBetaStart,
                             double beta_end = kDefaultBetaEnd);

/// Uniform stride floor(T / n) ending at T. Always derived from the full
/// 1..T grid, so subsampling is idempotent.
NoiseSchedule subsample(const NoiseSchedule& schedule, int n_steps);

/// Reads abar_1..abar_T, one value per line ('#' starts a comment). abar_0 = 1
/// is implied.
NoiseSchedule load_alpha_bar_file(const std::filesystem::path& path);
void save_alpha_bar_file(const NoiseSchedule& schedule, const std::filesystem::path& path);

}  // namespace aidi
