#include "flowmi/bench/benchmark.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "flowmi/ci/citest.hpp"
#include "flowmi/error.hpp"
#include "flowmi/est/estimator.hpp"
#include "flowmi/gen/datagen.hpp"
#include "flowmi/rng.hpp"

namespace flowmi::bench {

namespace {
constexpr std::uint64_t kRhoStream = 0xF0;

struct Job {
    int n, d, d_z;
    double rho; // NaN marks a cit job whose rho is drawn from the seed
    bool cit_dependent = false;
    int cell = 0;
    int run = 0;
    std::uint64_t seed = 0;
};

double draw_dependent_rho(std::uint64_t seed) {
    // |rho| uniform on [0.1, 0.99], sign uniform
    Rng rng(mix_seed(seed, kRhoStream));
    const double mag = rng.uniform(0.1, 0.99);
    return (rng.next_u64() & 1u) ? mag : -mag;
}

} // namespace

std::string to_string(Task t) {
    switch (t) {
    case Task::Mi: return "mi";
    case Task::Cmi: return "cmi";
    case Task::Cit: return "cit";
    }
    return "?";
}

Task task_from_string(const std::string& s) {
    if (s == "mi") return Task::Mi;
    if (s == "cmi") return Task::Cmi;
    if (s == "cit") return Task::Cit;
    throw ConfigError("unknown task '" + s + "' (mi|cmi|cit)");
}

BenchmarkResult run_benchmark(const BenchmarkConfig& cfg) {
    if (cfg.ns.empty() || cfg.ds.empty()) throw ConfigError("run_benchmark: empty grid");
    if (cfg.runs < 1) throw ConfigError("run_benchmark: runs must be >= 1");
    const bool needs_z = cfg.task != Task::Mi;
    if (needs_z && cfg.dzs.empty()) throw ConfigError("run_benchmark: empty d_z grid");
    if (cfg.task != Task::Cit && cfg.rhos.empty()) throw ConfigError("run_benchmark: empty rho grid");

    // flatten cells and runs; per-run seeds are fixed up front
    std::vector<Job> jobs;
    std::vector<CellSummary> cells;
    const auto dzs = needs_z ? cfg.dzs : std::vector<int>{0};
    for (int n : cfg.ns)
        for (int d : cfg.ds)
            for (int dz : dzs) {
                if (cfg.task == Task::Cit) {
                    CellSummary cell;
                    cell.n = n;
                    cell.d = d;
                    cell.d_z = dz;
                    const int ci = static_cast<int>(cells.size());
                    for (int r = 0; r < cfg.runs; ++r)
                        jobs.push_back(Job{n, d, dz, 0.0, true, ci, r, 0});
                    for (int r = 0; r < cfg.runs; ++r)
                        jobs.push_back(Job{n, d, dz, 0.0, false, ci, cfg.runs + r, 0});
                    cells.push_back(cell);
                } else {
                    for (double rho : cfg.rhos) {
                        CellSummary cell;
                        cell.n = n;
                        cell.d = d;
                        cell.d_z = dz;
                        cell.rho = rho;
                        cell.has_rho = true;
                        const int ci = static_cast<int>(cells.size());
                        for (int r = 0; r < cfg.runs; ++r)
                            jobs.push_back(Job{n, d, dz, rho, false, ci, r, 0});
                        cells.push_back(cell);
                    }
                }
            }
    for (std::size_t j = 0; j < jobs.size(); ++j) jobs[j].seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(j) + 1);

    std::vector<RunRecord> records(jobs.size());
    std::vector<std::string> errors(jobs.size());

    parallel_for(cfg.exec, static_cast<int>(jobs.size()), [&](int ji) {
        const Job& job = jobs[static_cast<std::size_t>(ji)];
        RunRecord& rec = records[static_cast<std::size_t>(ji)];
        try {
            const auto t0 = std::chrono::steady_clock::now();
            rec.task = cfg.task;
            rec.n = job.n;
            rec.d = job.d;
            rec.d_z = job.d_z;
            rec.run = job.run;
            rec.seed = job.seed;

            double rho = job.rho;
            std::string label;
            if (cfg.task == Task::Cit) {
                rho = job.cit_dependent ? draw_dependent_rho(job.seed) : 0.0;
                label = job.cit_dependent ? "dependent" : "independent";
            }
            rec.rho = rho;
            rec.label = label;

            const auto scenario =
                gen::generate(gen::draw_scenario_config(job.n, job.d, job.d_z, rho, job.seed));
            rec.ground_truth = scenario.ground_truth_cmi;

            if (cfg.task == Task::Cit) {
                ci::CITestConfig tc;
                tc.n_permutations = cfg.n_permutations;
                tc.alpha = cfg.alpha;
                tc.seed = job.seed;
                tc.flow = cfg.flow;
                const auto res = ci::ci_test(scenario.dataset, tc, Exec::Serial);
                rec.estimate = res.statistic;
                rec.p_value = res.p_value;
            } else if (cfg.task == Task::Cmi) {
                rec.estimate = est::estimate_cmi(scenario.dataset, cfg.flow, job.seed, Exec::Serial).value;
            } else {
                rec.estimate =
                    est::estimate_mi(scenario.dataset.x, scenario.dataset.y, cfg.flow, job.seed, Exec::Serial).value;
            }
            rec.wall_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(ji)] = e.what();
        }
    });

    for (std::size_t j = 0; j < errors.size(); ++j)
        if (!errors[j].empty())
            throw NumericError("benchmark run " + std::to_string(j) + " failed: " + errors[j]);

    // cell summaries in deterministic order
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        CellSummary& cell = cells[static_cast<std::size_t>(jobs[j].cell)];
        const RunRecord& rec = records[j];
        cell.runs += 1;
        cell.mean_estimate += rec.estimate;
        cell.mean_ground_truth += rec.ground_truth;
        cell.mean_wall_ms += rec.wall_ms;
    }
    for (auto& cell : cells) {
        if (cell.runs > 0) {
            cell.mean_estimate /= cell.runs;
            cell.mean_ground_truth /= cell.runs;
            cell.mean_wall_ms /= cell.runs;
        }
    }
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        CellSummary& cell = cells[static_cast<std::size_t>(jobs[j].cell)];
        const double dev = records[j].estimate - cell.mean_estimate;
        cell.stderr_estimate += dev * dev;
    }
    for (auto& cell : cells)
        cell.stderr_estimate =
            cell.runs > 1 ? std::sqrt(cell.stderr_estimate / (cell.runs - 1) / cell.runs) : 0.0;

    if (cfg.task == Task::Cit) {
        std::vector<std::vector<LabeledPValue>> per_cell(cells.size());
        for (std::size_t j = 0; j < jobs.size(); ++j)
            per_cell[static_cast<std::size_t>(jobs[j].cell)].push_back(
                LabeledPValue{jobs[j].cit_dependent, *records[j].p_value});
        for (std::size_t c = 0; c < cells.size(); ++c)
            cells[c].metrics = compute_metrics(per_cell[c], cfg.alpha);
    }

    return BenchmarkResult{std::move(records), std::move(cells)};
}

void write_records_csv(const std::string& path, const std::vector<RunRecord>& records) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write records CSV '" + path + "'");
    out << "task,n,d,d_z,rho,label,run,seed,estimate,p_value,ground_truth\n";
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (const auto& r : records) {
        out << to_string(r.task) << ',' << r.n << ',' << r.d << ',' << r.d_z << ',' << num(r.rho) << ',' << r.label
            << ',' << r.run << ',' << r.seed << ',' << num(r.estimate) << ','
            << (r.p_value ? num(*r.p_value) : std::string()) << ',' << num(r.ground_truth) << "\n";
    }
    if (!out) throw DataError("error while writing records CSV '" + path + "'");
}

} // namespace flowmi::bench
