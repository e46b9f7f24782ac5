#include "flowmi/flow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <string>

#include "flow_math.hpp"
#include "flowmi/error.hpp"
#include "flowmi/nn/adam.hpp"
#include "flowmi/nn/special.hpp"
#include "flowmi/rng.hpp"

namespace flowmi::flow {

namespace {

constexpr std::uint64_t kInitStream = 0x66697453; // parameter initialization
constexpr std::uint64_t kShuffleStream = 0x73687566; // epoch shuffling

void check_finite(std::span<const double> v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw DataError(std::string(what) + ": non-finite input value");
}

} // namespace

// Index cache lives behind a shared_ptr so flows stay cheap to copy.
struct FlowAccess {
    static const detail::FlowIndex& index(const ConditionalFlow& f);
};

void Standardizer::fit(const Matrix& m) {
    shift = m.col_mean();
    const auto var = m.col_var();
    scale.resize(var.size());
    for (std::size_t j = 0; j < var.size(); ++j) {
        const double s = std::sqrt(var[j]);
        scale[j] = s > 1e-12 ? s : 1.0;
    }
}

double Standardizer::log_scale_sum() const {
    double t = 0.0;
    for (double s : scale) t += std::log(s);
    return t;
}

detail::FlowIndex detail::FlowIndex::build(const FlowConfig& cfg, const nn::ParameterLayout& layout) {
    FlowIndex ix;
    ix.d = cfg.data_dim;
    ix.dz = cfg.cond_dim;
    ix.k = cfg.n_components;
    ix.dh = cfg.hidden_dim;
    ix.dims.resize(static_cast<std::size_t>(ix.d));
    for (int i = 0; i < ix.d; ++i) {
        DimOffsets& o = ix.dims[static_cast<std::size_t>(i)];
        const std::string p = "d" + std::to_string(i) + ".";
        o.cond_in = i + ix.dz;
        if (o.cond_in == 0) {
            o.cond_const = layout.at(p + "cond.const").offset;
        } else {
            o.cond_w1 = layout.at(p + "cond.w1").offset;
            o.cond_b1 = layout.at(p + "cond.b1").offset;
            o.cond_w2 = layout.at(p + "cond.w2").offset;
            o.cond_b2 = layout.at(p + "cond.b2").offset;
        }
        o.w_w1 = layout.at(p + "w.w1").offset;
        o.w_b1 = layout.at(p + "w.b1").offset;
        o.w_w2 = layout.at(p + "w.w2").offset;
        o.w_b2 = layout.at(p + "w.b2").offset;
        o.mu_w1 = layout.at(p + "mu.w1").offset;
        o.mu_b1 = layout.at(p + "mu.b1").offset;
        o.mu_w2 = layout.at(p + "mu.w2").offset;
        o.mu_b2 = layout.at(p + "mu.b2").offset;
        o.lv_w1 = layout.at(p + "lv.w1").offset;
        o.lv_b1 = layout.at(p + "lv.b1").offset;
        o.lv_w2 = layout.at(p + "lv.w2").offset;
        o.lv_b2 = layout.at(p + "lv.b2").offset;
    }
    return ix;
}

ConditionalFlow::ConditionalFlow(FlowConfig cfg, std::uint64_t init_seed) : cfg_(cfg) {
    if (cfg.data_dim < 1) throw ConfigError("ConditionalFlow: data_dim must be positive");
    if (cfg.cond_dim < 0) throw ConfigError("ConditionalFlow: cond_dim must be nonnegative");
    if (cfg.n_components < 1) throw ConfigError("ConditionalFlow: n_components must be >= 1");
    if (cfg.hidden_dim < 1) throw ConfigError("ConditionalFlow: hidden_dim must be positive");
    if (cfg.train.batch_size < 1) throw ConfigError("ConditionalFlow: batch_size must be positive");
    if (cfg.train.epochs < 0) throw ConfigError("ConditionalFlow: epochs must be nonnegative");

    const int d = cfg.data_dim, dz = cfg.cond_dim, k = cfg.n_components, dh = cfg.hidden_dim;

    nn::LayoutBuilder b;
    std::vector<nn::Mlp> mlps;
    for (int i = 0; i < d; ++i) {
        const std::string p = "d" + std::to_string(i) + ".";
        const int cin = i + dz;
        if (cin == 0) {
            b.add(p + "cond.const", {dh});
        } else {
            nn::Mlp cond{p + "cond", cin, dh, dh, nn::Head::Linear};
            cond.register_tensors(b);
            mlps.push_back(cond);
        }
        nn::Mlp w{p + "w", dh, dh, k, nn::Head::Softmax};
        nn::Mlp mu{p + "mu", dh, dh, k, nn::Head::Linear};
        nn::Mlp lv{p + "lv", dh, dh, k, nn::Head::Linear};
        w.register_tensors(b);
        mu.register_tensors(b);
        lv.register_tensors(b);
    }
    params_ = nn::ParameterVector(b.build());

    // Deterministic init order: dims ascending, conditioner then heads.
    Rng rng(mix_seed(init_seed, kInitStream));
    for (int i = 0; i < d; ++i) {
        const std::string p = "d" + std::to_string(i) + ".";
        const int cin = i + dz;
        if (cin == 0) {
            for (double& c : params_.tensor(p + "cond.const")) c = rng.uniform(-0.5, 0.5);
        } else {
            nn::Mlp{p + "cond", cin, dh, dh, nn::Head::Linear}.init(params_, rng);
        }
        nn::Mlp{p + "w", dh, dh, k, nn::Head::Softmax}.init(params_, rng);
        nn::Mlp{p + "mu", dh, dh, k, nn::Head::Linear}.init(params_, rng);
        nn::Mlp{p + "lv", dh, dh, k, nn::Head::Linear}.init(params_, rng);
        // spread the initial component means over the standardized data range
        auto mu_bias = params_.tensor(p + "mu.b2");
        for (int j = 0; j < k; ++j)
            mu_bias[static_cast<std::size_t>(j)] = k > 1 ? -2.0 + 4.0 * j / (k - 1) : 0.0;
    }

    x_std_.identity(d);
    z_std_.identity(dz);
    index_ = std::make_shared<const detail::FlowIndex>(detail::FlowIndex::build(cfg_, params_.layout()));
}

const detail::FlowIndex& FlowAccess::index(const ConditionalFlow& f) { return *f.index_; }

void ConditionalFlow::set_standardizers(Standardizer x_std, Standardizer z_std) {
    if (static_cast<int>(x_std.shift.size()) != cfg_.data_dim || static_cast<int>(z_std.shift.size()) != cfg_.cond_dim)
        throw ConfigError("set_standardizers: dimension mismatch");
    x_std_ = std::move(x_std);
    z_std_ = std::move(z_std);
}

Matrix ConditionalFlow::standardize_inputs(const Matrix& x) const {
    Matrix out(x.rows(), x.cols());
    for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < x.cols(); ++j) out.at(i, j) = x_std_.apply(j, x.at(i, j));
    return out;
}

Matrix ConditionalFlow::standardize_cond(const Matrix& z) const {
    Matrix out(z.rows(), z.cols());
    for (int i = 0; i < z.rows(); ++i)
        for (int j = 0; j < z.cols(); ++j) out.at(i, j) = z_std_.apply(j, z.at(i, j));
    return out;
}

TransformResult ConditionalFlow::transform(std::span<const double> x, std::span<const double> z) const {
    if (static_cast<int>(x.size()) != cfg_.data_dim)
        throw ConfigError("transform: x has length " + std::to_string(x.size()) + ", expected " +
                          std::to_string(cfg_.data_dim));
    if (static_cast<int>(z.size()) != cfg_.cond_dim)
        throw ConfigError("transform: z has length " + std::to_string(z.size()) + ", expected " +
                          std::to_string(cfg_.cond_dim));
    check_finite(x, "transform");
    check_finite(z, "transform");

    const auto& ix = FlowAccess::index(*this);
    std::vector<double> xs(x.size()), zs(z.size());
    for (std::size_t j = 0; j < x.size(); ++j) xs[j] = x_std_.apply(static_cast<int>(j), x[j]);
    for (std::size_t j = 0; j < z.size(); ++j) zs[j] = z_std_.apply(static_cast<int>(j), z[j]);

    detail::Workspace<double> ws;
    ws.init(ix);
    TransformResult r;
    r.u.resize(x.size());
    const double lp_std = detail::sample_pass<double, true>(ix, params_.values(), xs, zs, ws, r.u.data());
    r.log_jacobian = lp_std - x_std_.log_scale_sum();

    const double lo = std::numeric_limits<double>::min();
    const double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    for (double& u : r.u) u = std::clamp(u, lo, hi);
    return r;
}

double ConditionalFlow::log_density(std::span<const double> x, std::span<const double> z) const {
    if (static_cast<int>(x.size()) != cfg_.data_dim || static_cast<int>(z.size()) != cfg_.cond_dim)
        throw ConfigError("log_density: dimension mismatch");
    check_finite(x, "log_density");
    check_finite(z, "log_density");

    const auto& ix = FlowAccess::index(*this);
    std::vector<double> xs(x.size()), zs(z.size());
    for (std::size_t j = 0; j < x.size(); ++j) xs[j] = x_std_.apply(static_cast<int>(j), x[j]);
    for (std::size_t j = 0; j < z.size(); ++j) zs[j] = z_std_.apply(static_cast<int>(j), z[j]);

    detail::Workspace<double> ws;
    ws.init(ix);
    const double lp_std = detail::sample_pass<double, false>(ix, params_.values(), xs, zs, ws, nullptr);
    return lp_std - x_std_.log_scale_sum();
}

Matrix ConditionalFlow::to_gaussian(const Matrix& x, const Matrix& z, Exec exec) const {
    if (x.cols() != cfg_.data_dim || z.cols() != cfg_.cond_dim || x.rows() != z.rows())
        throw ConfigError("to_gaussian: dataset dimensions do not match the flow");
    if (!x.all_finite() || !z.all_finite()) throw DataError("to_gaussian: non-finite input value");

    const auto& ix = FlowAccess::index(*this);
    const Matrix xs = standardize_inputs(x);
    const Matrix zs = standardize_cond(z);
    Matrix out(x.rows(), x.cols());

    struct Ctx {
        detail::Workspace<double> ws;
        std::vector<double> u;
    };
    std::vector<std::unique_ptr<Ctx>> ctxs(static_cast<std::size_t>(max_threads()));

    parallel_for(exec, x.rows(), [&](int i) {
        auto& ctx = ctxs[static_cast<std::size_t>(thread_index())];
        if (!ctx) {
            ctx = std::make_unique<Ctx>();
            ctx->ws.init(ix);
            ctx->u.resize(static_cast<std::size_t>(ix.d));
        }
        detail::sample_pass<double, true>(ix, params_.values(), xs.row(i), zs.row(i), ctx->ws, ctx->u.data());
        auto orow = out.row(i);
        for (int j = 0; j < ix.d; ++j) {
            const double u = std::clamp(ctx->u[static_cast<std::size_t>(j)], kQuantileClamp, 1.0 - kQuantileClamp);
            orow[static_cast<std::size_t>(j)] = nn::norm_icdf(u);
        }
    });
    return out;
}

namespace {

// reusable per-thread training state; tapes keep their arenas across batches
struct ThreadCtx {
    nn::Tape tape;
    std::vector<nn::Rev> theta;
    detail::Workspace<nn::Rev> ws;
    bool ready = false;
};

struct BatchBuffers {
    std::vector<double> slots; // per-sample gradients, reduced in row order
    std::vector<double> nll;
};

double batch_grad(const ConditionalFlow& flow, const detail::FlowIndex& ix, const Matrix& x_std, const Matrix& z_std,
                  std::span<const int> rows, std::span<double> grad_out, std::vector<ThreadCtx>& pool,
                  BatchBuffers& bufs, Exec exec) {
    const int m = static_cast<int>(rows.size());
    const int np = flow.params().size();
    bufs.slots.resize(static_cast<std::size_t>(m) * static_cast<std::size_t>(np));
    bufs.nll.resize(static_cast<std::size_t>(m));

    // parameter leaves are shared by every sample of the batch
    for (ThreadCtx& ctx : pool) {
        if (!ctx.ready) {
            ctx.ws.init(ix);
            ctx.theta.resize(static_cast<std::size_t>(np));
            for (int j = 0; j < np; ++j) ctx.theta[static_cast<std::size_t>(j)] = nn::Rev{&ctx.tape, nn::Tape::Var{j}};
            ctx.ready = true;
        }
        ctx.tape.clear();
        ctx.tape.leaf_block(flow.params().values());
    }

    parallel_for(exec, m, [&](int s) {
        ThreadCtx& ctx = pool[static_cast<std::size_t>(thread_index())];
        ctx.tape.truncate(np);

        const int row = rows[static_cast<std::size_t>(s)];
        const nn::Rev lp = detail::sample_pass<nn::Rev, false>(
            ix, std::span<const nn::Rev>(ctx.theta), x_std.row(row), z_std.row(row), ctx.ws, nullptr);
        const nn::Rev root = -lp;
        bufs.nll[static_cast<std::size_t>(s)] = root.value();
        ctx.tape.backward(root.v);

        double* slot = bufs.slots.data() + static_cast<std::size_t>(s) * static_cast<std::size_t>(np);
        for (int j = 0; j < np; ++j) slot[j] = ctx.tape.adjoint(nn::Tape::Var{j});
    });

    // reductions in row order: results do not depend on the thread count
    double total = 0.0;
    for (int s = 0; s < m; ++s) total += bufs.nll[static_cast<std::size_t>(s)];
    for (int s = 0; s < m; ++s) {
        const double* slot = bufs.slots.data() + static_cast<std::size_t>(s) * static_cast<std::size_t>(np);
        for (int j = 0; j < np; ++j) grad_out[static_cast<std::size_t>(j)] += slot[j];
    }
    return total;
}

} // namespace

double ConditionalFlow::nll_grad_batch(const Matrix& x_std, const Matrix& z_std, std::span<const int> rows,
                                       std::span<double> grad_out, Exec exec) const {
    if (static_cast<int>(grad_out.size()) != params_.size())
        throw ConfigError("nll_grad_batch: gradient buffer size mismatch");
    std::vector<ThreadCtx> pool(static_cast<std::size_t>(max_threads()));
    BatchBuffers bufs;
    return batch_grad(*this, FlowAccess::index(*this), x_std, z_std, rows, grad_out, pool, bufs, exec);
}

std::vector<double> ConditionalFlow::nll_rows(const Matrix& x_std, const Matrix& z_std, Exec exec) const {
    const auto& ix = FlowAccess::index(*this);
    std::vector<double> nll(static_cast<std::size_t>(x_std.rows()));

    std::vector<std::unique_ptr<detail::Workspace<double>>> ctxs(static_cast<std::size_t>(max_threads()));
    parallel_for(exec, x_std.rows(), [&](int i) {
        auto& ws = ctxs[static_cast<std::size_t>(thread_index())];
        if (!ws) {
            ws = std::make_unique<detail::Workspace<double>>();
            ws->init(ix);
        }
        nll[static_cast<std::size_t>(i)] =
            -detail::sample_pass<double, false>(ix, params_.values(), x_std.row(i), z_std.row(i), *ws, nullptr);
    });
    return nll;
}

std::vector<double> ConditionalFlow::invert_transform(std::span<const double> u, std::span<const double> z) const {
    if (static_cast<int>(u.size()) != cfg_.data_dim || static_cast<int>(z.size()) != cfg_.cond_dim)
        throw ConfigError("invert_transform: dimension mismatch");
    for (double ui : u)
        if (!(ui > 0.0 && ui < 1.0)) throw DomainError("invert_transform: u must lie strictly in (0,1)");

    const auto& ix = FlowAccess::index(*this);
    std::vector<double> zs(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) zs[j] = z_std_.apply(static_cast<int>(j), z[j]);

    detail::Workspace<double> ws;
    ws.init(ix);
    detail::FrozenMixture mix;
    std::vector<double> xs(u.size(), 0.0);

    for (int i = 0; i < ix.d; ++i) {
        detail::eval_heads<double>(ix, params_.values(), i, xs, zs, ws);
        mix.from_workspace(ws);
        const double target = u[static_cast<std::size_t>(i)];

        double lo = -1.0, hi = 1.0;
        int expand = 0;
        while (mix.cdf(lo) >= target && expand++ < 128) lo *= 2.0;
        while (mix.cdf(hi) <= target && expand++ < 256) hi *= 2.0;
        if (expand >= 256) throw NumericError("invert_transform: failed to bracket coordinate " + std::to_string(i));

        int iter = 0;
        while (hi - lo > 1e-13 * std::max({1.0, std::abs(lo), std::abs(hi)})) {
            if (++iter > 200)
                throw NumericError("invert_transform: bisection did not converge for coordinate " + std::to_string(i));
            const double mid = 0.5 * (lo + hi);
            if (mix.cdf(mid) < target)
                lo = mid;
            else
                hi = mid;
        }
        xs[static_cast<std::size_t>(i)] = 0.5 * (lo + hi);
    }

    std::vector<double> out(u.size());
    for (std::size_t j = 0; j < u.size(); ++j) out[j] = x_std_.invert(static_cast<int>(j), xs[j]);
    return out;
}

std::pair<double, nn::ParameterVector> log_density_grad(const ConditionalFlow& flow, std::span<const double> x,
                                                        std::span<const double> z) {
    const auto& ix = FlowAccess::index(flow);
    const auto& params = flow.params();
    const int np = params.size();

    std::vector<double> xs(x.size()), zs(z.size());
    for (std::size_t j = 0; j < x.size(); ++j) xs[j] = flow.input_standardizer().apply(static_cast<int>(j), x[j]);
    for (std::size_t j = 0; j < z.size(); ++j) zs[j] = flow.cond_standardizer().apply(static_cast<int>(j), z[j]);

    nn::Tape tape;
    tape.leaf_block(params.values());
    std::vector<nn::Rev> theta(static_cast<std::size_t>(np));
    for (int j = 0; j < np; ++j) theta[static_cast<std::size_t>(j)] = nn::Rev{&tape, nn::Tape::Var{j}};

    detail::Workspace<nn::Rev> ws;
    ws.init(ix);
    const nn::Rev lp = detail::sample_pass<nn::Rev, false>(ix, theta, xs, zs, ws, nullptr);
    if (!std::isfinite(lp.value())) throw TrainError("log_density_grad: non-finite log-density");
    tape.backward(lp.v);

    nn::ParameterVector g(params.layout_ptr());
    auto gv = g.values();
    for (int j = 0; j < np; ++j) gv[static_cast<std::size_t>(j)] = tape.adjoint(nn::Tape::Var{j});
    return {lp.value() - flow.input_standardizer().log_scale_sum(), std::move(g)};
}

std::vector<double> fit(ConditionalFlow& flow_x, ConditionalFlow& flow_y, const Matrix& x, const Matrix& y,
                        const Matrix& z, Exec exec) {
    const int n = x.rows();
    if (n < 1) throw DataError("fit: empty dataset");
    if (y.rows() != n || z.rows() != n) throw DataError("fit: row counts of x/y/z disagree");
    if (x.cols() != flow_x.config().data_dim || y.cols() != flow_y.config().data_dim)
        throw ConfigError("fit: data dimensions do not match the flow configs");
    if (z.cols() != flow_x.config().cond_dim || z.cols() != flow_y.config().cond_dim)
        throw ConfigError("fit: conditioning dimensions do not match the flow configs");
    if (!x.all_finite() || !y.all_finite() || !z.all_finite()) throw DataError("fit: non-finite input value");

    const TrainConfig tc = flow_x.config().train;
    const TrainConfig ty = flow_y.config().train;
    if (tc.epochs != ty.epochs || tc.batch_size != ty.batch_size || tc.learning_rate != ty.learning_rate ||
        tc.seed != ty.seed)
        throw ConfigError("fit: the two flows must share one training schedule");

    Standardizer sx, sy, sz;
    sx.fit(x);
    sy.fit(y);
    if (z.cols() > 0)
        sz.fit(z);
    else
        sz.identity(0);
    flow_x.set_standardizers(sx, sz);
    flow_y.set_standardizers(sy, sz);

    const Matrix xs = flow_x.standardize_inputs(x);
    const Matrix ys = flow_y.standardize_inputs(y);
    const Matrix zs = flow_x.standardize_cond(z);

    std::vector<double> trace;
    if (tc.epochs == 0) return trace;

    const double log_scale_terms =
        (flow_x.input_standardizer().log_scale_sum() + flow_y.input_standardizer().log_scale_sum());

    nn::AdamState st_x(flow_x.params().size()), st_y(flow_y.params().size());
    nn::AdamConfig ac;
    ac.learning_rate = tc.learning_rate;

    Rng shuffle_rng(mix_seed(tc.seed, kShuffleStream));
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    std::vector<double> gx(static_cast<std::size_t>(flow_x.params().size()));
    std::vector<double> gy(static_cast<std::size_t>(flow_y.params().size()));

    // The two flows' gradients are independent, so they run as two tasks;
    // inside a task the batch stays serial (cheap batches make per-sample
    // forking a net loss). Reductions are ordered either way.
    std::vector<ThreadCtx> pool_x(static_cast<std::size_t>(max_threads()));
    std::vector<ThreadCtx> pool_y(static_cast<std::size_t>(max_threads()));
    BatchBuffers bufs_x, bufs_y;
    const auto& ix_x = FlowAccess::index(flow_x);
    const auto& ix_y = FlowAccess::index(flow_y);

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (int start = 0; start < n; start += tc.batch_size) {
            const int m = std::min(tc.batch_size, n - start);
            const std::span<const int> rows(order.data() + start, static_cast<std::size_t>(m));

            std::fill(gx.begin(), gx.end(), 0.0);
            std::fill(gy.begin(), gy.end(), 0.0);
            double nx = 0.0, ny = 0.0;
#ifdef _OPENMP
            if (exec == Exec::Parallel && max_threads() > 1) {
#pragma omp parallel sections
                {
#pragma omp section
                    nx = batch_grad(flow_x, ix_x, xs, zs, rows, gx, pool_x, bufs_x, Exec::Serial);
#pragma omp section
                    ny = batch_grad(flow_y, ix_y, ys, zs, rows, gy, pool_y, bufs_y, Exec::Serial);
                }
            } else
#endif
            {
                nx = batch_grad(flow_x, ix_x, xs, zs, rows, gx, pool_x, bufs_x, Exec::Serial);
                ny = batch_grad(flow_y, ix_y, ys, zs, rows, gy, pool_y, bufs_y, Exec::Serial);
            }
            if (!std::isfinite(nx + ny))
                throw TrainError("fit: non-finite loss at epoch " + std::to_string(epoch));

            const double inv_m = 1.0 / m;
            for (double& g : gx) g *= inv_m;
            for (double& g : gy) g *= inv_m;
            nn::adam_step(flow_x.params().values(), gx, st_x, ac);
            nn::adam_step(flow_y.params().values(), gy, st_y, ac);
        }

        const auto lx = flow_x.nll_rows(xs, zs, exec);
        const auto ly = flow_y.nll_rows(ys, zs, exec);
        double total = 0.0;
        for (int i = 0; i < n; ++i) total += lx[static_cast<std::size_t>(i)] + ly[static_cast<std::size_t>(i)];
        const double epoch_nll = total / n + log_scale_terms;
        if (!std::isfinite(epoch_nll)) throw TrainError("fit: non-finite loss at epoch " + std::to_string(epoch));
        trace.push_back(epoch_nll);
    }
    return trace;
}

} // namespace flowmi::flow
