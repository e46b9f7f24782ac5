#include "flowmi/est/estimator.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "flowmi/error.hpp"
#include "flowmi/rng.hpp"

namespace flowmi::est {

namespace {
constexpr std::uint64_t kInitX = 0xA1;
constexpr std::uint64_t kInitY = 0xA2;
constexpr std::uint64_t kTrain = 0xA3;
} // namespace

void Dataset::validate() const {
    if (x.rows() != y.rows() || x.rows() != z.rows()) throw DataError("Dataset: row counts of x/y/z disagree");
    if (x.rows() < 2) throw DataError("Dataset: need at least two samples");
    if (x.cols() < 1 || y.cols() < 1) throw DataError("Dataset: x and y must have at least one column");
    if (!x.all_finite() || !y.all_finite() || !z.all_finite()) throw DataError("Dataset: non-finite entry");
}

double gaussian_mi(const CovarianceMatrix& cov_x, const CovarianceMatrix& cov_y, const CovarianceMatrix& cov_xy) {
    const int dx = cov_x.dim(), dy = cov_y.dim();
    if (cov_xy.dim() != dx + dy) throw ContractError("gaussian_mi: joint covariance has wrong dimension");
    for (int i = 0; i < dx; ++i)
        for (int j = 0; j < dx; ++j)
            if (std::abs(cov_xy.at(i, j) - cov_x.at(i, j)) > 1e-9)
                throw ContractError("gaussian_mi: leading block of the joint covariance differs from cov_x");
    for (int i = 0; i < dy; ++i)
        for (int j = 0; j < dy; ++j)
            if (std::abs(cov_xy.at(dx + i, dx + j) - cov_y.at(i, j)) > 1e-9)
                throw ContractError("gaussian_mi: trailing block of the joint covariance differs from cov_y");

    return 0.5 * (log_det(cov_x) + log_det(cov_y) - log_det(cov_xy));
}

double gaussian_mi_jittered(CovarianceMatrix cov_x, CovarianceMatrix cov_y, CovarianceMatrix cov_xy) {
    try {
        return gaussian_mi(cov_x, cov_y, cov_xy);
    } catch (const NumericError&) {
        cov_x.add_diagonal(1e-10 * cov_x.trace() / cov_x.dim());
        cov_y.add_diagonal(1e-10 * cov_y.trace() / cov_y.dim());
        cov_xy.add_diagonal(1e-10 * cov_xy.trace() / cov_xy.dim());
        return gaussian_mi(cov_x, cov_y, cov_xy);
    }
}

CovarianceMatrix joint_covariance(const Matrix& x, const Matrix& y, Exec exec) {
    if (x.rows() != y.rows()) throw DataError("joint_covariance: row counts disagree");
    Matrix joint(x.rows(), x.cols() + y.cols());
    for (int i = 0; i < x.rows(); ++i) {
        auto row = joint.row(i);
        for (int j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x.at(i, j);
        for (int j = 0; j < y.cols(); ++j) row[static_cast<std::size_t>(x.cols() + j)] = y.at(i, j);
    }
    return sample_covariance(joint, exec);
}

namespace {

void column_stats(const Matrix& m, std::vector<double>& mean, std::vector<double>& var) {
    mean = m.col_mean();
    var = m.col_var();
}

} // namespace

PipelineResult run_pipeline(const Dataset& data, flow::FlowConfig cfg_x, flow::FlowConfig cfg_y, std::uint64_t seed,
                            Exec exec) {
    data.validate();
    cfg_x.data_dim = data.x.cols();
    cfg_x.cond_dim = data.z.cols();
    cfg_y.data_dim = data.y.cols();
    cfg_y.cond_dim = data.z.cols();
    cfg_x.train.seed = mix_seed(seed, kTrain);
    cfg_y.train.seed = cfg_x.train.seed;

    flow::ConditionalFlow fx(cfg_x, mix_seed(seed, kInitX));
    flow::ConditionalFlow fy(cfg_y, mix_seed(seed, kInitY));

    std::vector<double> trace;
    try {
        trace = flow::fit(fx, fy, data.x, data.y, data.z, exec);
    } catch (const TrainError& e) {
        throw TrainError(std::string("estimate[training]: ") + e.what());
    }

    PipelineResult pr{std::move(fx), std::move(fy), Matrix{}, Matrix{}, CovarianceMatrix{}, CovarianceMatrix{},
                      CovarianceMatrix{}, EstimateResult{}};
    try {
        pr.surrogate_x = pr.flow_x.to_gaussian(data.x, data.z, exec);
        pr.surrogate_y = pr.flow_y.to_gaussian(data.y, data.z, exec);
    } catch (const NumericError& e) {
        throw NumericError(std::string("estimate[surrogate]: ") + e.what());
    }

    try {
        pr.cov_x = sample_covariance(pr.surrogate_x, exec);
        pr.cov_y = sample_covariance(pr.surrogate_y, exec);
        pr.cov_xy = joint_covariance(pr.surrogate_x, pr.surrogate_y, exec);
        pr.result.value = gaussian_mi_jittered(pr.cov_x, pr.cov_y, pr.cov_xy);
    } catch (const NumericError& e) {
        throw NumericError(std::string("estimate[covariance]: ") + e.what());
    }

    pr.result.n = data.n();
    pr.result.d_x = data.x.cols();
    pr.result.d_y = data.y.cols();
    pr.result.d_z = data.z.cols();
    pr.result.loss_trace = std::move(trace);
    column_stats(pr.surrogate_x, pr.result.surrogate_mean_x, pr.result.surrogate_var_x);
    column_stats(pr.surrogate_y, pr.result.surrogate_mean_y, pr.result.surrogate_var_y);
    return pr;
}

EstimateResult estimate_cmi(const Dataset& data, const flow::FlowConfig& cfg, std::uint64_t seed, Exec exec) {
    if (data.z.cols() < 1) throw DataError("estimate_cmi: conditioning set is empty; use estimate_mi");
    return run_pipeline(data, cfg, cfg, seed, exec).result;
}

EstimateResult estimate_mi(const Matrix& x, const Matrix& y, const flow::FlowConfig& cfg, std::uint64_t seed,
                           Exec exec) {
    Dataset data{x, y, Matrix(x.rows(), 0)};
    return run_pipeline(data, cfg, cfg, seed, exec).result;
}

} // namespace flowmi::est
