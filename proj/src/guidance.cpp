#include "aidi/guidance.hpp"

#include "aidi/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace aidi {

Grid::Grid(std::size_t r, std::size_t c, std::vector<double> v) : rows(r), cols(c), values(std::move(v)) {
    if (values.size() != r * c) throw ConfigError("grid values do not match its dimensions");
}

void AttentionMap::validate() const {
    if (grid.rows == 0 || grid.cols == 0 || grid.values.empty()) throw ConfigError("attention map is empty");
    if (grid.values.size() != grid.rows * grid.cols) throw ConfigError("attention map values do not match its dimensions");
    for (double v : grid.values)
        if (!std::isfinite(v) || v < 0.0) throw ConfigError("attention map entries must be finite and nonnegative");
}

std::string_view to_string(Polarity p) { return p == Polarity::Positive ? "positive" : "negative"; }

Polarity parse_polarity(std::string_view s) {
    if (s == "positive") return Polarity::Positive;
    if (s == "negative") return Polarity::Negative;
    throw ConfigError("unknown polarity '" + std::string(s) + "' (expected positive or negative)");
}

void MaskNormConfig::validate() const {
    if (!(big_m > 0.0) || !std::isfinite(big_m)) throw ConfigError("mask normalisation M must be > 0");
    if (delta && !std::isfinite(*delta)) throw ConfigError("mask threshold must be finite");
}

Grid normalize_map(const AttentionMap& map, const MaskNormConfig& cfg) {
    map.validate();
    cfg.validate();
    const auto& v = map.grid.values;
    const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    Grid out(map.grid.rows, map.grid.cols, 0.0);
    if (lo == hi) return out;

    const double delta =
        cfg.delta ? *cfg.delta : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    const double m = cfg.big_m;
    for (std::size_t k = 0; k < v.size(); ++k) {
        const double x = v[k];
        if (x < delta) {
            out.values[k] = -m * (delta - x) / (delta - lo);
        } else if (x > delta) {
            out.values[k] = m * (x - delta) / (hi - delta);
        }
    }
    return out;
}

SoftMask soft_mask(const Grid& norm, Polarity polarity) {
    // Largest double below 1; keeps both tails strictly inside (0, 1).
    constexpr double kUpper = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    SoftMask mask{Grid(norm.rows, norm.cols, 0.0)};
    for (std::size_t k = 0; k < norm.values.size(); ++k) {
        const double x = polarity == Polarity::Positive ? norm.values[k] : -norm.values[k];
        if (!std::isfinite(x)) throw ConfigError("soft_mask: non-finite normalised value");
        // sigmoid(|x|) lies in [0.5, 1), so 1 - it is exact and the two
        // polarities sum to exactly 1.
        const double upper = std::min(1.0 / (1.0 + std::exp(-std::abs(x))), kUpper);
        mask.grid.values[k] = x >= 0.0 ? upper : 1.0 - upper;
    }
    return mask;
}

Grid blended_scale_field(const SoftMask& mask, double omega, double omega_e) {
    Grid out(mask.grid.rows, mask.grid.cols, 0.0);
    const double span = omega_e - omega;
    for (std::size_t k = 0; k < out.values.size(); ++k) out.values[k] = span * mask.grid.values[k] + omega;
    return out;
}

AttentionMap synthetic_attention(std::size_t rows, std::size_t cols, double center_row, double center_col,
                                 double sigma) {
    if (rows == 0 || cols == 0) throw ConfigError("synthetic_attention: degenerate shape");
    if (!(sigma > 0.0)) throw ConfigError("synthetic_attention: sigma must be > 0");
    if (!(center_row >= 0.0 && center_row <= static_cast<double>(rows - 1) && center_col >= 0.0 &&
          center_col <= static_cast<double>(cols - 1)))
        throw ConfigError("synthetic_attention: center outside the grid");
    AttentionMap map{Grid(rows, cols, 0.0), AttentionProvenance::Synthetic};
    const double denom = 2.0 * sigma * sigma;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double dr = static_cast<double>(r) - center_row;
            const double dc = static_cast<double>(c) - center_col;
            map.grid(r, c) = std::exp(-(dr * dr + dc * dc) / denom);
        }
    }
    return map;
}

std::pair<std::size_t, std::size_t> spatial_dims(const Shape& shape) {
    if (shape.empty()) throw ConfigError("spatial_dims: empty shape");
    if (shape.size() == 1) return {1, shape[0]};
    return {shape[shape.size() - 2], shape[shape.size() - 1]};
}

Latent broadcast_to_latent(const Grid& grid, const Shape& shape) {
    if (grid.rows == 0 || grid.cols == 0) throw ConfigError("broadcast_to_latent: empty grid");
    const auto [h, w] = spatial_dims(shape);
    if (grid.rows > h || grid.cols > w)
        throw ConfigError("broadcast_to_latent: grid " + std::to_string(grid.rows) + "x" + std::to_string(grid.cols) +
                          " is finer than the latent's " + std::to_string(h) + "x" + std::to_string(w));
    Latent out(shape);
    const std::size_t plane = h * w;
    const std::size_t channels = out.size() / plane;
    for (std::size_t r = 0; r < h; ++r) {
        const std::size_t sr = r * grid.rows / h;
        for (std::size_t c = 0; c < w; ++c) {
            const std::size_t sc = c * grid.cols / w;
            const double v = grid(sr, sc);
            for (std::size_t ch = 0; ch < channels; ++ch) out[ch * plane + r * w + c] = v;
        }
    }
    return out;
}

}  // namespace aidi
