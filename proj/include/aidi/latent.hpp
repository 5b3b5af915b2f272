#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace aidi {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Flat real tensor with shape metadata. A latent z_t, a noise prediction
/// or a per-element field: anything that is diffused, inverted or blended.
class Latent {
public:
    Latent() = default;
    /// Zero-filled tensor of the given shape.
    explicit Latent(Shape shape);
    Latent(Shape shape, std::vector<double> data);

    static Latent filled(Shape shape, double value);

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<const double> values() const { return data_; }
    std::span<double> values() { return data_; }
    const double* data() const { return data_.data(); }
    double* data() { return data_.data(); }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    bool all_finite() const;
    bool same_shape(const Latent& other) const { return shape_ == other.shape_; }

    /// Bitwise-meaningful equality (operator== on every element).
    friend bool operator==(const Latent& a, const Latent& b) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

/// Throws ConfigError when shapes differ; `what` names the call site.
void require_same_shape(const Latent& a, const Latent& b, const char* what);

double l2_norm(const Latent& x);
double l2_distance(const Latent& a, const Latent& b);
/// ||a - b|| / ||reference||; `a` is compared against `reference`.
double relative_l2(const Latent& a, const Latent& reference);

}  // namespace aidi
