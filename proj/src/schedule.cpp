#include "aidi/schedule.hpp"

#include "aidi/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace aidi {

namespace {

void validate_alpha_bar(const std::vector<double>& ab) {
    if (ab.size() < 2) throw ConfigError("schedule needs abar_0 and at least one timestep");
    if (ab[0] != 1.0) throw ConfigError("schedule requires abar_0 == 1");
    for (std::size_t t = 1; t < ab.size(); ++t) {
        if (!(ab[t] > 0.0 && ab[t] <= 1.0) || !std::isfinite(ab[t]))
            throw ConfigError("abar_" + std::to_string(t) + " outside (0, 1]");
        // abar_1 may equal abar_0; from t = 1 on the sequence must strictly fall.
        if (t >= 2 && !(ab[t] < ab[t - 1]))
            throw ConfigError("abar must strictly decrease on 1..T (violated at t=" + std::to_string(t) + ")");
    }
}

void validate_timesteps(const std::vector<int>& ts, int big_t) {
    if (ts.empty()) throw ConfigError("timestep grid is empty");
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (ts[i] < 1 || ts[i] > big_t) throw ConfigError("timestep " + std::to_string(ts[i]) + " outside [1, T]");
        if (i > 0 && ts[i] <= ts[i - 1]) throw ConfigError("timestep grid must be strictly increasing");
    }
}

std::vector<int> full_grid(int big_t) {
    std::vector<int> ts(static_cast<std::size_t>(big_t));
    for (int t = 1; t <= big_t; ++t) ts[static_cast<std::size_t>(t - 1)] = t;
    return ts;
}

}  // namespace

NoiseSchedule::NoiseSchedule(std::vector<double> alpha_bar) : alpha_bar_(std::move(alpha_bar)) {
    validate_alpha_bar(alpha_bar_);
    timesteps_ = full_grid(big_t());
}

NoiseSchedule::NoiseSchedule(std::vector<double> alpha_bar, std::vector<int> timesteps)
    : alpha_bar_(std::move(alpha_bar)), timesteps_(std::move(timesteps)) {
    validate_alpha_bar(alpha_bar_);
    validate_timesteps(timesteps_, big_t());
}

double NoiseSchedule::alpha_bar(int t) const {
    if (t < 0 || t > big_t()) throw ConfigError("timestep " + std::to_string(t) + " outside [0, T]");
    return alpha_bar_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::ddim_variance(int t, int t_prev) const {
    const double ab_t = alpha_bar(t);
    const double ab_prev = alpha_bar(t_prev);
    if (ab_t >= 1.0) return 0.0;
    return (1.0 - ab_prev) / (1.0 - ab_t) * (1.0 - ab_t / ab_prev);
}

NoiseSchedule build_schedule(int big_t, double beta_start, double beta_end) {
    if (big_t < 1) throw ConfigError("build_schedule: T must be >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw ConfigError("build_schedule: need 0 < beta_start <= beta_end < 1");

    const double lo = std::sqrt(beta_start);
    const double hi = std::sqrt(beta_end);
    std::vector<double> ab(static_cast<std::size_t>(big_t) + 1);
    ab[0] = 1.0;
    for (int s = 1; s <= big_t; ++s) {
        const double frac = big_t == 1 ? 0.0 : static_cast<double>(s - 1) / (big_t - 1);
        const double root = lo + (hi - lo) * frac;
        ab[static_cast<std::size_t>(s)] = ab[static_cast<std::size_t>(s - 1)] * (1.0 - root * root);
    }
    return NoiseSchedule(std::move(ab));
}

NoiseSchedule subsample(const NoiseSchedule& schedule, int n_steps) {
    const int big_t = schedule.big_t();
    if (n_steps < 1 || n_steps > big_t)
        throw ConfigError("subsample: n_steps must be in [1, " + std::to_string(big_t) + "]");
    const int stride = big_t / n_steps;
    std::vector<int> ts(static_cast<std::size_t>(n_steps));
    for (int k = 0; k < n_steps; ++k) ts[static_cast<std::size_t>(k)] = big_t - stride * (n_steps - 1 - k);
    std::vector<double> ab(schedule.alpha_bars().begin(), schedule.alpha_bars().end());
    return NoiseSchedule(std::move(ab), std::move(ts));
}

NoiseSchedule load_alpha_bar_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open schedule file " + path.string());
    std::vector<double> ab{1.0};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        double v;
        if (!(ls >> v)) {
            std::string rest;
            if (std::istringstream(line) >> rest)
                throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected a real number");
            continue;
        }
        std::string extra;
        if (ls >> extra) throw IoError(path.string() + ":" + std::to_string(line_no) + ": one value per line");
        ab.push_back(v);
    }
    return NoiseSchedule(std::move(ab));
}

void save_alpha_bar_file(const NoiseSchedule& schedule, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write schedule file " + path.string());
    char buf[64];
    for (int t = 1; t <= schedule.big_t(); ++t) {
        std::snprintf(buf, sizeof buf, "%.17g\n", schedule.alpha_bar(t));
        out << buf;
    }
}

}  // namespace aidi
