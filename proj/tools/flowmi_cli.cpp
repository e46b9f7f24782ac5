// Command-line front end: MI/CMI estimation and conditional-independence
// testing on CSV data, synthetic benchmark grids, and scenario generation.
// JSON results go to stdout; diagnostics to stderr. Exit codes: 0 success,
// 2 usage or data error, 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "flowmi/bench/benchmark.hpp"
#include "flowmi/bench/csv.hpp"
#include "flowmi/ci/citest.hpp"
#include "flowmi/error.hpp"
#include "flowmi/est/estimator.hpp"
#include "flowmi/gen/datagen.hpp"
#include "flowmi/parallel.hpp"

using json = nlohmann::json;
using namespace flowmi;

namespace {

struct CommonOpts {
    int n_components = 16;
    int hidden_dim = 4;
    int epochs = 100;
    int batch_size = 64;
    double learning_rate = 0.01;
    std::uint64_t seed = 0;
    int workers = 0;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--n-components", o.n_components, "Mixture components per coordinate")->capture_default_str();
    cmd->add_option("--hidden-dim", o.hidden_dim, "Hidden units per MLP")->capture_default_str();
    cmd->add_option("--epochs", o.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--batch-size", o.batch_size, "Minibatch size")->capture_default_str();
    cmd->add_option("--lr", o.learning_rate, "Learning rate")->capture_default_str();
    cmd->add_option("--seed", o.seed, "Master seed")->capture_default_str();
    cmd->add_option("--workers", o.workers,
                    "Worker thread count (0 = library default; FLOWMI_WORKERS overrides the default)");
}

flow::FlowConfig flow_config(const CommonOpts& o) {
    flow::FlowConfig cfg;
    cfg.n_components = o.n_components;
    cfg.hidden_dim = o.hidden_dim;
    cfg.train.epochs = o.epochs;
    cfg.train.batch_size = o.batch_size;
    cfg.train.learning_rate = o.learning_rate;
    return cfg;
}

void apply_workers(int workers) {
    if (workers <= 0) {
        if (const char* env = std::getenv("FLOWMI_WORKERS")) workers = std::atoi(env);
    }
    if (workers > 0) set_worker_count(workers);
}

json diagnostics_json(const est::EstimateResult& r) {
    json d;
    d["loss_trace"] = r.loss_trace;
    d["final_nll"] = r.loss_trace.empty() ? json() : json(r.loss_trace.back());
    d["surrogate_mean_x"] = r.surrogate_mean_x;
    d["surrogate_var_x"] = r.surrogate_var_x;
    d["surrogate_mean_y"] = r.surrogate_mean_y;
    d["surrogate_var_y"] = r.surrogate_var_y;
    return d;
}

struct ColumnSpec {
    std::string input;
    std::string x_cols, y_cols, z_cols;
};

void add_columns(CLI::App* cmd, ColumnSpec& c, bool z_required) {
    cmd->add_option("--input", c.input, "Input CSV file")->required();
    cmd->add_option("--x-cols", c.x_cols, "Comma-separated x column names")->required();
    cmd->add_option("--y-cols", c.y_cols, "Comma-separated y column names")->required();
    auto* z = cmd->add_option("--z-cols", c.z_cols, "Comma-separated conditioning column names");
    if (z_required) z->required();
}

est::Dataset load_dataset(const ColumnSpec& c) {
    const auto table = bench::read_csv(c.input);
    const auto x_names = bench::split_list(c.x_cols);
    const auto y_names = bench::split_list(c.y_cols);
    const auto z_names = bench::split_list(c.z_cols);
    if (x_names.empty() || y_names.empty()) throw ConfigError("x and y column lists must be non-empty");
    est::Dataset data{table.select(x_names), table.select(y_names),
                      z_names.empty() ? Matrix(table.values.rows(), 0) : table.select(z_names)};
    data.validate();
    return data;
}

int cmd_estimate(const ColumnSpec& cols, const CommonOpts& opts) {
    apply_workers(opts.workers);
    const auto data = load_dataset(cols);
    const auto cfg = flow_config(opts);
    const est::EstimateResult r = data.z.cols() > 0 ? est::estimate_cmi(data, cfg, opts.seed)
                                                    : est::estimate_mi(data.x, data.y, cfg, opts.seed);
    json out;
    out["estimate"] = r.value;
    out["n"] = r.n;
    out["dims"] = {{"d_x", r.d_x}, {"d_y", r.d_y}, {"d_z", r.d_z}};
    out["seed"] = opts.seed;
    out["diagnostics"] = diagnostics_json(r);
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_citest(const ColumnSpec& cols, const CommonOpts& opts, int permutations, double alpha) {
    apply_workers(opts.workers);
    const auto data = load_dataset(cols);
    ci::CITestConfig cfg;
    cfg.n_permutations = permutations;
    cfg.alpha = alpha;
    cfg.seed = opts.seed;
    cfg.flow = flow_config(opts);
    const auto r = ci::ci_test(data, cfg);

    json out;
    out["statistic"] = r.statistic;
    out["p_value"] = r.p_value;
    out["decision"] = r.decision == ci::Decision::Dependent ? "dependent" : "independent";
    out["permutations"] = permutations;
    out["alpha"] = alpha;
    out["seed"] = opts.seed;
    out["n"] = r.estimate.n;
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_generate(int n, int d, int dz, double rho, const std::string& z_family, const std::string& f_name,
                 const std::string& g_name, std::uint64_t seed, const std::string& output) {
    gen::ScenarioConfig cfg;
    cfg.n = n;
    cfg.d = d;
    cfg.d_z = dz;
    cfg.rho = rho;
    cfg.z_family = gen::z_family_from_string(z_family);
    cfg.f_choice = gen::bijection_from_string(f_name);
    cfg.g_choice = gen::bijection_from_string(g_name);
    cfg.seed = seed;
    const auto scenario = gen::generate(cfg);

    std::vector<std::string> columns;
    Matrix values(n, 2 * d + dz);
    for (int j = 0; j < d; ++j) columns.push_back("x" + std::to_string(j));
    for (int j = 0; j < d; ++j) columns.push_back("y" + std::to_string(j));
    for (int j = 0; j < dz; ++j) columns.push_back("z" + std::to_string(j));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) values.at(i, j) = scenario.dataset.x.at(i, j);
        for (int j = 0; j < d; ++j) values.at(i, d + j) = scenario.dataset.y.at(i, j);
        for (int j = 0; j < dz; ++j) values.at(i, 2 * d + j) = scenario.dataset.z.at(i, j);
    }
    bench::write_csv(output, columns, values);

    const std::string meta_path = output + ".meta";
    {
        std::ofstream meta(meta_path);
        if (!meta) throw DataError("cannot write metadata file '" + meta_path + "'");
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", scenario.ground_truth_cmi);
        meta << "format=flowmi-scenario-v1\n"
             << "n=" << n << "\nd=" << d << "\nd_z=" << dz << "\nrho=" << rho << "\nz_family=" << z_family
             << "\nf=" << f_name << "\ng=" << g_name << "\nseed=" << seed << "\nground_truth_cmi=" << buf
             << "\nclip_events=" << scenario.clip_events << "\n";
    }

    json out;
    out["output"] = output;
    out["meta"] = meta_path;
    out["n"] = n;
    out["ground_truth_cmi"] = scenario.ground_truth_cmi;
    out["clip_events"] = scenario.clip_events;
    out["seed"] = seed;
    std::cout << out.dump(2) << "\n";
    return 0;
}

json metrics_json(const bench::MetricsSummary& m) {
    json j;
    j["f1"] = m.f1;
    j["auc"] = m.auc ? json(*m.auc) : json();
    j["type1_rate"] = m.type1_rate ? json(*m.type1_rate) : json();
    j["type2_rate"] = m.type2_rate ? json(*m.type2_rate) : json();
    j["n_dependent"] = m.n_dependent;
    j["n_independent"] = m.n_independent;
    return j;
}

int cmd_benchmark(bench::BenchmarkConfig cfg, const std::string& output) {
    const auto res = bench::run_benchmark(cfg);
    bench::write_records_csv(output, res.records);

    json out;
    out["task"] = bench::to_string(cfg.task);
    out["records"] = static_cast<int>(res.records.size());
    out["output"] = output;
    out["seed"] = cfg.seed;
    json cells = json::array();
    for (const auto& c : res.cells) {
        json jc;
        jc["n"] = c.n;
        jc["d"] = c.d;
        jc["d_z"] = c.d_z;
        if (c.has_rho) jc["rho"] = c.rho;
        jc["runs"] = c.runs;
        jc["mean_estimate"] = c.mean_estimate;
        jc["stderr_estimate"] = c.stderr_estimate;
        jc["mean_ground_truth"] = c.mean_ground_truth;
        jc["mean_wall_ms"] = c.mean_wall_ms;
        if (c.metrics) jc["metrics"] = metrics_json(*c.metrics);
        cells.push_back(jc);
    }
    out["cells"] = cells;
    std::cout << out.dump(2) << "\n";
    return 0;
}

std::vector<int> parse_int_list(const std::string& s, const char* what) {
    std::vector<int> out;
    for (const auto& tok : bench::split_list(s)) out.push_back(std::stoi(tok));
    if (out.empty()) throw ConfigError(std::string(what) + " list is empty");
    return out;
}

std::vector<double> parse_double_list(const std::string& s, const char* what) {
    std::vector<double> out;
    for (const auto& tok : bench::split_list(s)) out.push_back(std::stod(tok));
    if (out.empty()) throw ConfigError(std::string(what) + " list is empty");
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Normalizing-flow mutual information estimation and conditional independence testing"};
    app.require_subcommand(1);

    // estimate
    auto* est_cmd = app.add_subcommand("estimate", "Estimate MI or CMI from a CSV file");
    ColumnSpec est_cols;
    CommonOpts est_opts;
    add_columns(est_cmd, est_cols, false);
    add_common(est_cmd, est_opts);

    // citest
    auto* ci_cmd = app.add_subcommand("citest", "Permutation-based conditional independence test");
    ColumnSpec ci_cols;
    CommonOpts ci_opts;
    int ci_permutations = 100;
    double ci_alpha = 0.05;
    add_columns(ci_cmd, ci_cols, true);
    add_common(ci_cmd, ci_opts);
    ci_cmd->add_option("--permutations", ci_permutations, "Number of permutations B")->capture_default_str();
    ci_cmd->add_option("--alpha", ci_alpha, "Significance level")->capture_default_str();

    // generate
    auto* gen_cmd = app.add_subcommand("generate", "Generate a synthetic scenario with known ground truth");
    int gen_n = 1000, gen_d = 1, gen_dz = 1;
    double gen_rho = 0.0;
    std::string gen_family = "normal", gen_f = "cube", gen_g = "cube", gen_output;
    std::uint64_t gen_seed = 0;
    gen_cmd->add_option("--n", gen_n, "Sample count")->capture_default_str();
    gen_cmd->add_option("--d", gen_d, "Dimension of x and y")->capture_default_str();
    gen_cmd->add_option("--dz", gen_dz, "Conditioning dimension (0 for plain MI)")->capture_default_str();
    gen_cmd->add_option("--rho", gen_rho, "Latent correlation in (-1,1)")->capture_default_str();
    gen_cmd->add_option("--z-family", gen_family, "uniform|normal|laplace")->capture_default_str();
    gen_cmd->add_option("--f", gen_f, "Bijection for x: linear|cube|expneg|reciprocal|log|sigmoid")
        ->capture_default_str();
    gen_cmd->add_option("--g", gen_g, "Bijection for y")->capture_default_str();
    gen_cmd->add_option("--seed", gen_seed, "Generation seed")->capture_default_str();
    gen_cmd->add_option("--output", gen_output, "Output CSV path")->required();

    // benchmark
    auto* bench_cmd = app.add_subcommand("benchmark", "Run a synthetic benchmark grid");
    CommonOpts bench_opts;
    std::string bench_task = "mi", bench_ns = "1000", bench_ds = "1", bench_dzs = "1", bench_rhos = "0,0.5,0.9";
    std::string bench_output;
    int bench_runs = 10, bench_permutations = 100;
    double bench_alpha = 0.05;
    bench_cmd->add_option("--task", bench_task, "mi|cmi|cit")->capture_default_str();
    bench_cmd->add_option("--n", bench_ns, "Comma-separated sample counts")->capture_default_str();
    bench_cmd->add_option("--d", bench_ds, "Comma-separated dimensions")->capture_default_str();
    bench_cmd->add_option("--dz", bench_dzs, "Comma-separated conditioning dimensions")->capture_default_str();
    bench_cmd->add_option("--rho", bench_rhos, "Comma-separated correlations (mi/cmi)")->capture_default_str();
    bench_cmd->add_option("--runs", bench_runs, "Runs per cell (per label for cit)")->capture_default_str();
    bench_cmd->add_option("--permutations", bench_permutations, "Permutations per cit run")->capture_default_str();
    bench_cmd->add_option("--alpha", bench_alpha, "Significance level for cit")->capture_default_str();
    bench_cmd->add_option("--output", bench_output, "Records CSV path")->required();
    add_common(bench_cmd, bench_opts);

    try {
        app.parse(argc, argv);

        if (est_cmd->parsed()) return cmd_estimate(est_cols, est_opts);
        if (ci_cmd->parsed()) return cmd_citest(ci_cols, ci_opts, ci_permutations, ci_alpha);
        if (gen_cmd->parsed())
            return cmd_generate(gen_n, gen_d, gen_dz, gen_rho, gen_family, gen_f, gen_g, gen_seed, gen_output);
        if (bench_cmd->parsed()) {
            apply_workers(bench_opts.workers);
            bench::BenchmarkConfig cfg;
            cfg.task = bench::task_from_string(bench_task);
            cfg.ns = parse_int_list(bench_ns, "--n");
            cfg.ds = parse_int_list(bench_ds, "--d");
            cfg.dzs = parse_int_list(bench_dzs, "--dz");
            cfg.rhos = parse_double_list(bench_rhos, "--rho");
            cfg.runs = bench_runs;
            cfg.seed = bench_opts.seed;
            cfg.alpha = bench_alpha;
            cfg.n_permutations = bench_permutations;
            cfg.flow = flow_config(bench_opts);
            return cmd_benchmark(cfg, bench_output);
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const TrainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
