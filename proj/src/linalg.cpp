#include "flowmi/est/linalg.hpp"

#include <cmath>
#include <string>

namespace flowmi::est {

bool CovarianceMatrix::is_symmetric(double tol) const {
    for (int i = 0; i < dim_; ++i)
        for (int j = i + 1; j < dim_; ++j)
            if (std::abs(at(i, j) - at(j, i)) > tol) return false;
    return true;
}

std::vector<double> cholesky(const CovarianceMatrix& m) {
    const int d = m.dim();
    std::vector<double> L(static_cast<std::size_t>(d) * static_cast<std::size_t>(d), 0.0);
    for (int j = 0; j < d; ++j) {
        double pivot = m.at(j, j);
        for (int k = 0; k < j; ++k) pivot -= L[static_cast<std::size_t>(j) * d + k] * L[static_cast<std::size_t>(j) * d + k];
        if (!(pivot > 1e-12))
            throw NumericError("cholesky: matrix is not positive definite at pivot " + std::to_string(j) +
                               " (value " + std::to_string(pivot) + ")");
        const double ljj = std::sqrt(pivot);
        L[static_cast<std::size_t>(j) * d + j] = ljj;
        for (int i = j + 1; i < d; ++i) {
            double s = m.at(i, j);
            for (int k = 0; k < j; ++k) s -= L[static_cast<std::size_t>(i) * d + k] * L[static_cast<std::size_t>(j) * d + k];
            L[static_cast<std::size_t>(i) * d + j] = s / ljj;
        }
    }
    return L;
}

double log_det(const CovarianceMatrix& m) {
    const auto L = cholesky(m);
    const int d = m.dim();
    double s = 0.0;
    for (int j = 0; j < d; ++j) s += std::log(L[static_cast<std::size_t>(j) * d + j]);
    return 2.0 * s;
}

CovarianceMatrix sample_covariance(const Matrix& samples, Exec exec) {
    const int n = samples.rows();
    const int d = samples.cols();
    if (n < 2) throw DataError("sample_covariance: need at least two rows");

    CovarianceMatrix cov(d);
    const double norm = 1.0 / (n - 1);

    // One (j, k) entry per task; the inner sample loop runs in fixed order,
    // so serial and parallel drivers agree bit for bit.
    const int upper = d * (d + 1) / 2;
    std::vector<double> tri(static_cast<std::size_t>(upper));
    parallel_for(exec, upper, [&](int t) {
        // unrank t -> (j, k), j <= k, row-major over the upper triangle
        int j = 0, rem = t;
        while (rem >= d - j) {
            rem -= d - j;
            ++j;
        }
        const int k = j + rem;
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += samples.at(i, j) * samples.at(i, k);
        tri[static_cast<std::size_t>(t)] = s * norm;
    });

    int t = 0;
    for (int j = 0; j < d; ++j)
        for (int k = j; k < d; ++k, ++t) {
            cov.at(j, k) = tri[static_cast<std::size_t>(t)];
            cov.at(k, j) = tri[static_cast<std::size_t>(t)];
        }
    return cov;
}

} // namespace flowmi::est
