#pragma once

#include <cstdint>
#include <vector>

#include "flowmi/est/linalg.hpp"
#include "flowmi/flow/flow.hpp"
#include "flowmi/matrix.hpp"
#include "flowmi/parallel.hpp"

namespace flowmi::est {

// Aligned sample matrices; z may have zero columns (plain MI).
struct Dataset {
    Matrix x, y, z;

    int n() const { return x.rows(); }
    void validate() const;
};

struct EstimateResult {
    double value = 0.0; // nats; may be slightly negative near independence, never clipped
    int n = 0;
    int d_x = 0, d_y = 0, d_z = 0;
    std::vector<double> loss_trace;                    // per-epoch mean negative log-likelihood
    std::vector<double> surrogate_mean_x, surrogate_var_x;
    std::vector<double> surrogate_mean_y, surrogate_var_y;
};

// Closed-form Gaussian mutual information from the three covariance blocks:
// (log det cov_x + log det cov_y - log det cov_xy) / 2. The leading/trailing
// principal blocks of cov_xy must match cov_x/cov_y.
double gaussian_mi(const CovarianceMatrix& cov_x, const CovarianceMatrix& cov_y, const CovarianceMatrix& cov_xy);

// gaussian_mi with one diagonal-jitter retry (1e-10 * trace/dim) when a
// factorization fails; a second failure propagates.
double gaussian_mi_jittered(CovarianceMatrix cov_x, CovarianceMatrix cov_y, CovarianceMatrix cov_xy);

// Everything the estimator computes, kept for reuse (permutation testing,
// recomputation checks).
struct PipelineResult {
    flow::ConditionalFlow flow_x, flow_y;
    Matrix surrogate_x, surrogate_y;
    CovarianceMatrix cov_x, cov_y, cov_xy;
    EstimateResult result;
};

// Train the two flows jointly by maximum likelihood, push the data through
// them onto Gaussian surrogates, and evaluate the closed-form Gaussian MI of
// the surrogates. Deterministic given (data, configs, seed).
PipelineResult run_pipeline(const Dataset& data, flow::FlowConfig cfg_x, flow::FlowConfig cfg_y, std::uint64_t seed,
                            Exec exec = Exec::Parallel);

// Conditional mutual information; requires d_z >= 1.
EstimateResult estimate_cmi(const Dataset& data, const flow::FlowConfig& cfg, std::uint64_t seed,
                            Exec exec = Exec::Parallel);

// Plain mutual information (empty conditioning set).
EstimateResult estimate_mi(const Matrix& x, const Matrix& y, const flow::FlowConfig& cfg, std::uint64_t seed,
                           Exec exec = Exec::Parallel);

// Joint covariance of concatenated rows [x | y].
CovarianceMatrix joint_covariance(const Matrix& x, const Matrix& y, Exec exec = Exec::Parallel);

} // namespace flowmi::est
