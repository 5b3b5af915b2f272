#include "aidi/latent.hpp"

#include "aidi/error.hpp"
#include "aidi/kernels.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace aidi {

std::size_t shape_size(const Shape& shape) {
    if (shape.empty()) return 0;
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

namespace {

void validate_shape(const Shape& shape) {
    if (shape.empty()) throw ConfigError("latent shape must have at least one dimension");
    for (auto d : shape)
        if (d == 0) throw ConfigError("latent shape " + shape_to_string(shape) + " has a zero dimension");
}

}  // namespace

Latent::Latent(Shape shape) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(shape_size(shape_), 0.0);
}

Latent::Latent(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    if (shape_size(shape_) != data_.size())
        throw ConfigError("latent shape " + shape_to_string(shape_) + " does not match " +
                          std::to_string(data_.size()) + " values");
}

Latent Latent::filled(Shape shape, double value) {
    Latent out(std::move(shape));
    std::fill(out.data_.begin(), out.data_.end(), value);
    return out;
}

bool Latent::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void require_same_shape(const Latent& a, const Latent& b, const char* what) {
    if (!a.same_shape(b))
        throw ConfigError(std::string(what) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                          shape_to_string(b.shape()));
}

double l2_norm(const Latent& x) {
    return std::sqrt(kernels::active().dot(x.data(), x.data(), x.size()));
}

double l2_distance(const Latent& a, const Latent& b) {
    require_same_shape(a, b, "l2_distance");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

double relative_l2(const Latent& a, const Latent& reference) {
    const double denom = l2_norm(reference);
    const double num = l2_distance(a, reference);
    if (denom == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return num / denom;
}

}  // namespace aidi
