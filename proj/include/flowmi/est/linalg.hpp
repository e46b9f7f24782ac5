#pragma once

#include <vector>

#include "flowmi/error.hpp"
#include "flowmi/matrix.hpp"
#include "flowmi/parallel.hpp"

namespace flowmi::est {

// Symmetric positive (semi)definite matrix in full row-major storage.
class CovarianceMatrix {
  public:
    CovarianceMatrix() = default;
    explicit CovarianceMatrix(int dim) : dim_(dim), a_(static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim), 0.0) {
        if (dim < 1) throw ConfigError("CovarianceMatrix: dim must be positive");
    }

    int dim() const { return dim_; }
    double& at(int i, int j) { return a_[static_cast<std::size_t>(i) * dim_ + j]; }
    double at(int i, int j) const { return a_[static_cast<std::size_t>(i) * dim_ + j]; }

    bool is_symmetric(double tol = 1e-12) const;

    // adds c to every diagonal entry
    void add_diagonal(double c) {
        for (int i = 0; i < dim_; ++i) at(i, i) += c;
    }

    double trace() const {
        double t = 0.0;
        for (int i = 0; i < dim_; ++i) t += at(i, i);
        return t;
    }

  private:
    int dim_ = 0;
    std::vector<double> a_;
};

// Lower-triangular Cholesky factor. Throws NumericError naming the first
// failing pivot when the matrix is not positive definite (pivot <= 1e-12).
std::vector<double> cholesky(const CovarianceMatrix& m);

// ln det via the triangular factor: 2 * sum of log-diagonal entries.
double log_det(const CovarianceMatrix& m);

// Uncentered sample covariance (1/(n-1)) sum_i v_i v_i^T. Requires n >= 2.
CovarianceMatrix sample_covariance(const Matrix& samples, Exec exec = Exec::Parallel);

} // namespace flowmi::est
