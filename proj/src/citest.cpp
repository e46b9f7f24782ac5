#include "flowmi/ci/citest.hpp"

#include <memory>
#include <string>

#include "flowmi/error.hpp"
#include "flowmi/rng.hpp"

namespace flowmi::ci {

using est::CovarianceMatrix;

void CITestConfig::validate() const {
    if (n_permutations < 1) throw ConfigError("CITestConfig: need at least one permutation");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("CITestConfig: alpha must lie in (0,1)");
}

std::vector<double> permutation_stats(const Matrix& surrogate_x, const Matrix& surrogate_y,
                                      const std::vector<std::vector<int>>& perms, Exec exec) {
    const int n = surrogate_x.rows();
    if (surrogate_y.rows() != n) throw DataError("permutation_stats: row counts disagree");

    for (const auto& perm : perms)
        if (static_cast<int>(perm.size()) != n) throw DataError("permutation_stats: permutation length mismatch");

    // x' never moves, so its covariance is shared across permutations.
    const CovarianceMatrix cov_x = est::sample_covariance(surrogate_x, exec);

    const int b_count = static_cast<int>(perms.size());
    std::vector<double> stats(static_cast<std::size_t>(b_count));
    std::vector<std::unique_ptr<Matrix>> bufs(static_cast<std::size_t>(max_threads()));
    std::vector<std::string> errors(static_cast<std::size_t>(b_count));

    parallel_for(exec, b_count, [&](int b) {
        try {
            const auto& perm = perms[static_cast<std::size_t>(b)];
            auto& ybuf = bufs[static_cast<std::size_t>(thread_index())];
            if (!ybuf) ybuf = std::make_unique<Matrix>(n, surrogate_y.cols());
            for (int i = 0; i < n; ++i) {
                const auto src = surrogate_y.row(perm[static_cast<std::size_t>(i)]);
                auto dst = ybuf->row(i);
                for (std::size_t j = 0; j < src.size(); ++j) dst[j] = src[j];
            }

            const CovarianceMatrix cov_y = est::sample_covariance(*ybuf, Exec::Serial);
            const CovarianceMatrix cov_xy = est::joint_covariance(surrogate_x, *ybuf, Exec::Serial);
            stats[static_cast<std::size_t>(b)] = est::gaussian_mi_jittered(cov_x, cov_y, cov_xy);
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(b)] = e.what(); // rethrown below; never escapes the parallel region
        }
    });
    for (const auto& e : errors)
        if (!e.empty()) throw NumericError("permutation_stats: " + e);
    return stats;
}

std::vector<double> permutation_null(const Matrix& surrogate_x, const Matrix& surrogate_y, int n_permutations,
                                     std::uint64_t seed, Exec exec) {
    if (n_permutations < 1) throw ConfigError("permutation_null: need at least one permutation");
    const int n = surrogate_y.rows();

    std::vector<std::vector<int>> perms(static_cast<std::size_t>(n_permutations));
    for (int b = 0; b < n_permutations; ++b) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(b)));
        perms[static_cast<std::size_t>(b)] = rng.permutation(n);
    }
    return permutation_stats(surrogate_x, surrogate_y, perms, exec);
}

RankResult rank_p_value(double statistic, std::span<const double> permuted_stats, double alpha) {
    if (permuted_stats.empty()) throw ConfigError("rank_p_value: no permutation statistics");
    int exceed = 0;
    for (double s : permuted_stats)
        if (statistic <= s) ++exceed;
    const double p = static_cast<double>(exceed) / static_cast<double>(permuted_stats.size());
    return RankResult{p, p <= alpha ? Decision::Dependent : Decision::Independent};
}

CITestResult ci_test(const est::Dataset& data, const CITestConfig& cfg, Exec exec) {
    cfg.validate();
    if (data.z.cols() < 1) throw DataError("ci_test: conditioning set is empty");

    auto pipeline = est::run_pipeline(data, cfg.flow, cfg.flow, cfg.seed, exec);

    CITestResult r;
    r.statistic = pipeline.result.value;
    r.estimate = std::move(pipeline.result);
    r.permuted_stats =
        permutation_null(pipeline.surrogate_x, pipeline.surrogate_y, cfg.n_permutations,
                         mix_seed(cfg.seed, 0xB00u), exec);

    const RankResult rank = rank_p_value(r.statistic, r.permuted_stats, cfg.alpha);
    r.p_value = rank.p_value;
    r.decision = rank.decision;
    return r;
}

} // namespace flowmi::ci
