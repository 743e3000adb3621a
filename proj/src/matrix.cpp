#include "hardboost/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hardboost/errors.hpp"

namespace hardboost {

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const noexcept { return hardboost::all_finite(data_); }

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw DimensionError("dot: length " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

bool all_finite(std::span<const double> v) noexcept {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Vector affine(const Matrix& m, std::span<const double> x, std::span<const double> bias) {
    if (x.size() != m.cols() || bias.size() != m.rows())
        throw DimensionError("affine: matrix " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                             " applied to input of length " + std::to_string(x.size()) + " with bias of length " +
                             std::to_string(bias.size()));
    Vector out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto row = m.row(r);
        double acc = bias[r];
        for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * x[c];
        out[r] = acc;
    }
    return out;
}

Vector transpose_times(const Matrix& m, std::span<const double> g) {
    if (g.size() != m.rows())
        throw DimensionError("transpose_times: gradient length " + std::to_string(g.size()) + " vs " +
                             std::to_string(m.rows()) + " rows");
    Vector out(m.cols(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto row = m.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) out[c] += row[c] * g[r];
    }
    return out;
}

void add_outer(Matrix& m, std::span<const double> a, std::span<const double> b, double scale) {
    if (a.size() != m.rows() || b.size() != m.cols()) throw DimensionError("add_outer: shape mismatch");
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double ar = scale * a[r];
        auto row = m.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += ar * b[c];
    }
}

Vector normalized(std::span<const double> v) {
    const double n = l2_norm(v);
    if (!(n >= 1e-12)) throw DegenerateEmbeddingError("cannot normalize vector with norm " + std::to_string(n));
    Vector out(v.begin(), v.end());
    for (auto& x : out) x /= n;
    return out;
}

Vector normalize_backward(std::span<const double> unit, double norm, std::span<const double> upstream) {
    const double proj = dot(unit, upstream);
    Vector out(unit.size());
    for (std::size_t i = 0; i < unit.size(); ++i) out[i] = (upstream[i] - unit[i] * proj) / norm;
    return out;
}

}  // namespace hardboost
