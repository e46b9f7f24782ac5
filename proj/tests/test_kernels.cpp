#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "flowmi/ci/citest.hpp"
#include "flowmi/est/estimator.hpp"
#include "flowmi/flow/flow.hpp"
#include "flowmi/rng.hpp"

// The parallel kernels only ever write disjoint per-index slots and reduce in
// fixed index order, so every result must match its serial reference bit for
// bit, whatever the thread count.

using namespace flowmi;

namespace {

Matrix normal_matrix(Rng& rng, int n, int d) {
    Matrix m(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) m.at(i, j) = rng.normal();
    return m;
}

} // namespace

TEST_CASE("batch gradient kernel: serial == parallel") {
    Rng rng(1);
    flow::FlowConfig cfg;
    cfg.data_dim = 2;
    cfg.cond_dim = 1;
    flow::ConditionalFlow f(cfg, 7);
    const Matrix xs = normal_matrix(rng, 257, 2);
    const Matrix zs = normal_matrix(rng, 257, 1);

    std::vector<int> rows(257);
    std::iota(rows.begin(), rows.end(), 0);
    std::vector<double> gs(static_cast<std::size_t>(f.params().size()), 0.0);
    std::vector<double> gp(static_cast<std::size_t>(f.params().size()), 0.0);

    const double ns = f.nll_grad_batch(xs, zs, rows, gs, Exec::Serial);
    const double np = f.nll_grad_batch(xs, zs, rows, gp, Exec::Parallel);
    CHECK(ns == np);
    CHECK(gs == gp);
}

TEST_CASE("row NLL kernel: serial == parallel") {
    Rng rng(2);
    flow::FlowConfig cfg;
    cfg.data_dim = 1;
    cfg.cond_dim = 2;
    flow::ConditionalFlow f(cfg, 8);
    const Matrix xs = normal_matrix(rng, 501, 1);
    const Matrix zs = normal_matrix(rng, 501, 2);
    CHECK(f.nll_rows(xs, zs, Exec::Serial) == f.nll_rows(xs, zs, Exec::Parallel));
}

TEST_CASE("surrogate kernel: serial == parallel") {
    Rng rng(3);
    flow::FlowConfig cfg;
    cfg.data_dim = 2;
    cfg.cond_dim = 0;
    flow::ConditionalFlow f(cfg, 9);
    const Matrix x = normal_matrix(rng, 333, 2);
    const Matrix z(333, 0);
    const auto a = f.to_gaussian(x, z, Exec::Serial);
    const auto b = f.to_gaussian(x, z, Exec::Parallel);
    for (int i = 0; i < 333; ++i)
        for (int j = 0; j < 2; ++j) CHECK(a.at(i, j) == b.at(i, j));
}

TEST_CASE("covariance kernel: serial == parallel") {
    Rng rng(4);
    const Matrix m = normal_matrix(rng, 400, 5);
    const auto a = est::sample_covariance(m, Exec::Serial);
    const auto b = est::sample_covariance(m, Exec::Parallel);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) CHECK(a.at(i, j) == b.at(i, j));
}

TEST_CASE("permutation kernel: serial == parallel") {
    Rng rng(5);
    const Matrix sx = normal_matrix(rng, 200, 1);
    const Matrix sy = normal_matrix(rng, 200, 1);
    CHECK(ci::permutation_null(sx, sy, 37, 99, Exec::Serial) == ci::permutation_null(sx, sy, 37, 99, Exec::Parallel));
}

TEST_CASE("whole training runs: serial == parallel") {
    Rng rng(6);
    const Matrix x = normal_matrix(rng, 300, 1);
    Matrix y = normal_matrix(rng, 300, 1);
    for (int i = 0; i < 300; ++i) y.at(i, 0) = std::exp(y.at(i, 0) * 0.5);
    const Matrix z = normal_matrix(rng, 300, 1);

    flow::FlowConfig cfg;
    cfg.data_dim = 1;
    cfg.cond_dim = 1;
    cfg.train.epochs = 12;
    cfg.train.seed = 4;

    flow::ConditionalFlow sx(cfg, 1), sy(cfg, 2);
    flow::ConditionalFlow px(cfg, 1), py(cfg, 2);
    const auto ts = flow::fit(sx, sy, x, y, z, Exec::Serial);
    const auto tp = flow::fit(px, py, x, y, z, Exec::Parallel);

    CHECK(ts == tp);
    for (int i = 0; i < sx.params().size(); ++i)
        CHECK(sx.params().values()[static_cast<std::size_t>(i)] == px.params().values()[static_cast<std::size_t>(i)]);
    for (int i = 0; i < sy.params().size(); ++i)
        CHECK(sy.params().values()[static_cast<std::size_t>(i)] == py.params().values()[static_cast<std::size_t>(i)]);
}

TEST_CASE("end-to-end estimates: serial == parallel") {
    Rng rng(7);
    Matrix x = normal_matrix(rng, 250, 1);
    Matrix y(250, 1), z = normal_matrix(rng, 250, 1);
    for (int i = 0; i < 250; ++i) y.at(i, 0) = 0.7 * x.at(i, 0) + 0.5 * rng.normal();

    flow::FlowConfig cfg;
    cfg.train.epochs = 10;
    est::Dataset data{x, y, z};
    const auto a = est::estimate_cmi(data, cfg, 17, Exec::Serial);
    const auto b = est::estimate_cmi(data, cfg, 17, Exec::Parallel);
    CHECK(a.value == b.value);
    CHECK(a.loss_trace == b.loss_trace);
}
