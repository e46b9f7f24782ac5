#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flowmi/bench/metrics.hpp"
#include "flowmi/flow/flow.hpp"
#include "flowmi/parallel.hpp"

namespace flowmi::bench {

enum class Task { Mi, Cmi, Cit };

std::string to_string(Task t);
Task task_from_string(const std::string& s);

struct BenchmarkConfig {
    Task task = Task::Mi;
    std::vector<int> ns{1000};
    std::vector<int> ds{1};
    std::vector<int> dzs{1};          // ignored for mi
    std::vector<double> rhos{0.0};    // ignored for cit (labels instead)
    int runs = 10;                    // per cell; for cit, per label
    std::uint64_t seed = 0;
    double alpha = 0.05;
    int n_permutations = 100;
    flow::FlowConfig flow;
    Exec exec = Exec::Parallel; // parallelism across runs; inner pipelines stay serial
};

struct RunRecord {
    Task task = Task::Mi;
    int n = 0, d = 0, d_z = 0;
    double rho = 0.0;          // drawn value for cit dependent runs
    std::string label;         // "dependent"/"independent" for cit, empty otherwise
    int run = 0;
    std::uint64_t seed = 0;    // regenerates this record bit for bit
    double estimate = 0.0;     // estimate, or the cit statistic
    std::optional<double> p_value;
    double ground_truth = 0.0;
    double wall_ms = 0.0;      // reported in summaries, not in the records CSV
};

struct CellSummary {
    int n = 0, d = 0, d_z = 0;
    double rho = 0.0;
    bool has_rho = false;
    int runs = 0;
    double mean_estimate = 0.0;
    double stderr_estimate = 0.0;
    double mean_ground_truth = 0.0;
    double mean_wall_ms = 0.0;
    std::optional<MetricsSummary> metrics; // cit cells only
};

struct BenchmarkResult {
    std::vector<RunRecord> records;
    std::vector<CellSummary> cells;
};

BenchmarkResult run_benchmark(const BenchmarkConfig& cfg);

// Fixed schema: task,n,d,d_z,rho,label,run,seed,estimate,p_value,ground_truth.
// Wall time is deliberately not written so reruns are byte-identical.
void write_records_csv(const std::string& path, const std::vector<RunRecord>& records);

} // namespace flowmi::bench
