#pragma once

#include "aidi/latent.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace aidi {

/// Row-major 2-D grid of reals: an attention map, its normalised form, a
/// soft mask or a guidance-scale field.
struct Grid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    Grid() = default;
    Grid(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}
    Grid(std::size_t r, std::size_t c, std::vector<double> v);

    std::size_t size() const { return values.size(); }
    double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }

    friend bool operator==(const Grid&, const Grid&) = default;
};

enum class AttentionProvenance { Synthetic, File };

/// Nonnegative finite map localising the edit, e.g. cross-attention of the
/// anchor token.
struct AttentionMap {
    Grid grid;
    AttentionProvenance provenance = AttentionProvenance::Synthetic;

    void validate() const;
};

/// Anchor polarity: Positive marks the area to edit, Negative the area to keep.
enum class Polarity { Positive, Negative };

std::string_view to_string(Polarity p);
Polarity parse_polarity(std::string_view s);

struct MaskNormConfig {
    /// Threshold; the map's arithmetic mean when unset.
    std::optional<double> delta;
    double big_m = 10.0;
    Polarity polarity = Polarity::Positive;

    void validate() const;
};

/// Two-sided normalisation: values below delta map affinely from [min, delta]
/// onto [-M, 0], the rest from [delta, max] onto [0, M]. A constant map
/// normalises to zeros.
Grid normalize_map(const AttentionMap& map, const MaskNormConfig& cfg);

/// Soft editing mask, strictly inside (0, 1).
struct SoftMask {
    Grid grid;
};

/// sigmoid(norm) for Positive, sigmoid(-norm) for Negative. The two
/// polarities of one input sum to exactly 1 elementwise; saturated values are
/// held one ulp inside (0, 1).
SoftMask soft_mask(const Grid& norm, Polarity polarity);

/// w(k) = (omega_e - omega) * mask(k) + omega.
Grid blended_scale_field(const SoftMask& mask, double omega, double omega_e);

/// exp(-|k - center|^2 / (2 sigma^2)) over a rows x cols grid; center is
/// (row, col) in pixel coordinates.
AttentionMap synthetic_attention(std::size_t rows, std::size_t cols, double center_row, double center_col,
                                 double sigma);

/// Spatial dimensions (H, W) a latent's elements are laid out over: the last
/// two dims of [.., H, W], or 1 x D for a flat [D] latent.
std::pair<std::size_t, std::size_t> spatial_dims(const Shape& shape);

/// Nearest-neighbour upsampling of `grid` to the latent's spatial dims,
/// repeated over any leading (channel) dims.
Latent broadcast_to_latent(const Grid& grid, const Shape& shape);

}  // namespace aidi
