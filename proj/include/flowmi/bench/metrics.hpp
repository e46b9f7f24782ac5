#pragma once

#include <optional>
#include <span>

namespace flowmi::bench {

struct LabeledPValue {
    bool truly_dependent = false;
    double p_value = 1.0;
};

// Classification quality of a batch of test runs. "Dependent" is the positive
// class; decisions use the permutation rule (reject iff p <= alpha). AUC
// scores runs by 1 - p and uses midranks for ties; it is absent when only one
// label is present, as are the error rates whose label has no runs.
struct MetricsSummary {
    double f1 = 0.0;
    std::optional<double> auc;
    std::optional<double> type1_rate; // over truly independent runs only
    std::optional<double> type2_rate; // over truly dependent runs only
    int n_dependent = 0;
    int n_independent = 0;
};

MetricsSummary compute_metrics(std::span<const LabeledPValue> records, double alpha);

} // namespace flowmi::bench
