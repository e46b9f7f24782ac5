#pragma once

#include <cstdint>
#include <vector>

#include "flowmi/est/estimator.hpp"

namespace flowmi::ci {

enum class Decision { Independent, Dependent };

struct CITestConfig {
    int n_permutations = 100; // B
    double alpha = 0.05;
    std::uint64_t seed = 0;
    flow::FlowConfig flow;

    void validate() const;
};

struct CITestResult {
    double statistic = 0.0;            // the unpermuted estimate
    double p_value = 0.0;              // exactly k/B
    std::vector<double> permuted_stats;
    Decision decision = Decision::Independent;
    est::EstimateResult estimate;      // full diagnostics of the unpermuted run
};

// Null statistics on explicit row permutations of the y surrogate. Each entry
// is the Gaussian MI of covariances recomputed on (x', permuted y'); the
// flows are never retrained.
std::vector<double> permutation_stats(const Matrix& surrogate_x, const Matrix& surrogate_y,
                                      const std::vector<std::vector<int>>& perms, Exec exec = Exec::Parallel);

// Seeded version: permutation b uses the derived seed mix(seed XOR b), so
// entries are independent of the execution schedule.
std::vector<double> permutation_null(const Matrix& surrogate_x, const Matrix& surrogate_y, int n_permutations,
                                     std::uint64_t seed, Exec exec = Exec::Parallel);

// Rank rule shared by ci_test: p = (1/B) * #{b : statistic <= stat_b},
// dependent iff p <= alpha.
struct RankResult {
    double p_value;
    Decision decision;
};
RankResult rank_p_value(double statistic, std::span<const double> permuted_stats, double alpha);

// Full test: one estimator run for the statistic and the surrogates, then a
// permutation-simulated null.
CITestResult ci_test(const est::Dataset& data, const CITestConfig& cfg, Exec exec = Exec::Parallel);

} // namespace flowmi::ci
