#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hardboost {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    void fill(double v);
    bool all_finite() const noexcept;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);
bool all_finite(std::span<const double> v) noexcept;

/// out = m * x + bias. Throws DimensionError on mismatch.
Vector affine(const Matrix& m, std::span<const double> x, std::span<const double> bias);

/// out = m^T * g.
Vector transpose_times(const Matrix& m, std::span<const double> g);

/// m += scale * a b^T.
void add_outer(Matrix& m, std::span<const double> a, std::span<const double> b, double scale = 1.0);

/// Returns v / ||v||; DegenerateEmbeddingError when ||v|| < 1e-12.
Vector normalized(std::span<const double> v);

/// Gradient of u = v/||v|| pulled back to v: (I - u u^T) g / ||v||.
Vector normalize_backward(std::span<const double> unit, double norm, std::span<const double> upstream);

}  // namespace hardboost
