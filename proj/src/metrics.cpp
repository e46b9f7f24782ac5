#include "flowmi/bench/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "flowmi/error.hpp"

namespace flowmi::bench {

MetricsSummary compute_metrics(std::span<const LabeledPValue> records, double alpha) {
    if (records.empty()) throw DataError("compute_metrics: no records");

    MetricsSummary m;
    int tp = 0, fp = 0, fn = 0;
    for (const auto& r : records) {
        const bool reject = r.p_value <= alpha;
        if (r.truly_dependent) {
            ++m.n_dependent;
            if (reject)
                ++tp;
            else
                ++fn;
        } else {
            ++m.n_independent;
            if (reject) ++fp;
        }
    }

    if (m.n_independent > 0) m.type1_rate = static_cast<double>(fp) / m.n_independent;
    if (m.n_dependent > 0) m.type2_rate = static_cast<double>(fn) / m.n_dependent;

    const double precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 1.0;
    const double recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 1.0;
    m.f1 = (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;

    if (m.n_dependent > 0 && m.n_independent > 0) {
        // midrank AUC on score = 1 - p
        const int n = static_cast<int>(records.size());
        std::vector<int> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](int a, int b) {
            return records[static_cast<std::size_t>(a)].p_value > records[static_cast<std::size_t>(b)].p_value;
        });
        std::vector<double> rank(static_cast<std::size_t>(n));
        int i = 0;
        while (i < n) {
            int j = i;
            while (j + 1 < n && records[static_cast<std::size_t>(idx[static_cast<std::size_t>(j + 1)])].p_value ==
                                    records[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])].p_value)
                ++j;
            const double mid = 0.5 * ((i + 1) + (j + 1));
            for (int t = i; t <= j; ++t) rank[static_cast<std::size_t>(idx[static_cast<std::size_t>(t)])] = mid;
            i = j + 1;
        }
        double rank_sum_dep = 0.0;
        for (int t = 0; t < n; ++t)
            if (records[static_cast<std::size_t>(t)].truly_dependent) rank_sum_dep += rank[static_cast<std::size_t>(t)];
        m.auc = (rank_sum_dep - 0.5 * m.n_dependent * (m.n_dependent + 1)) /
                (static_cast<double>(m.n_dependent) * m.n_independent);
    }
    return m;
}

} // namespace flowmi::bench
