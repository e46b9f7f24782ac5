#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "flowmi/error.hpp"

namespace flowmi {

// Dense row-major matrix of doubles. Rows are samples, columns are variable
// dimensions. Columns may be zero (empty conditioning set).
class Matrix {
  public:
    Matrix() = default;
    Matrix(int rows, int cols) : rows_(rows), cols_(cols), v_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), 0.0) {
        if (rows < 0 || cols < 0) throw ConfigError("Matrix: negative dimensions");
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    double& at(int i, int j) { return v_[static_cast<std::size_t>(i) * cols_ + j]; }
    double at(int i, int j) const { return v_[static_cast<std::size_t>(i) * cols_ + j]; }

    std::span<double> row(int i) { return {v_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)}; }
    std::span<const double> row(int i) const {
        return {v_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)};
    }

    std::span<double> data() { return v_; }
    std::span<const double> data() const { return v_; }

    bool all_finite() const {
        for (double x : v_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    std::vector<double> col_mean() const {
        std::vector<double> m(static_cast<std::size_t>(cols_), 0.0);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) m[static_cast<std::size_t>(j)] += at(i, j);
        for (double& x : m) x /= rows_ > 0 ? rows_ : 1;
        return m;
    }

    // population variance (1/n)
    std::vector<double> col_var() const {
        const auto m = col_mean();
        std::vector<double> v(static_cast<std::size_t>(cols_), 0.0);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) {
                const double d = at(i, j) - m[static_cast<std::size_t>(j)];
                v[static_cast<std::size_t>(j)] += d * d;
            }
        for (double& x : v) x /= rows_ > 0 ? rows_ : 1;
        return v;
    }

  private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> v_;
};

} // namespace flowmi
