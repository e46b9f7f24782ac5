#pragma once

// Internal evaluation core for the conditional autoregressive flow. The same
// templated code path produces plain values (S = double) and tape-recorded
// values for reverse-mode gradients (S = nn::Rev), so the trained objective
// and the evaluated density can never drift apart.

#include <span>
#include <string>
#include <vector>

#include "flowmi/flow/flow.hpp"
#include "flowmi/nn/mlp.hpp"
#include "flowmi/nn/param.hpp"
#include "flowmi/nn/special.hpp"
#include "flowmi/nn/tape.hpp"

namespace flowmi::flow::detail {

inline constexpr double kLogVarClamp = 7.0; // ln sigma^2 is clamped to +-7 before exponentiation

// Flat-vector offsets of every tensor belonging to one coordinate.
struct DimOffsets {
    int cond_in = 0; // (i-1) + cond_dim; 0 means the conditioner is a learnable constant
    int cond_w1 = -1, cond_b1 = -1, cond_w2 = -1, cond_b2 = -1;
    int cond_const = -1;
    int w_w1 = 0, w_b1 = 0, w_w2 = 0, w_b2 = 0;
    int mu_w1 = 0, mu_b1 = 0, mu_w2 = 0, mu_b2 = 0;
    int lv_w1 = 0, lv_b1 = 0, lv_w2 = 0, lv_b2 = 0;
};

struct FlowIndex {
    int d = 0, dz = 0, k = 0, dh = 0;
    std::vector<DimOffsets> dims;

    static FlowIndex build(const FlowConfig& cfg, const nn::ParameterLayout& layout);
};

template <class S> struct Workspace {
    std::vector<double> cond_in;
    std::vector<S> h, hbuf, logits, mu, lv, terms;

    void init(const FlowIndex& ix) {
        cond_in.resize(static_cast<std::size_t>(ix.d - 1 + ix.dz > 0 ? ix.d - 1 + ix.dz : 1));
        h.resize(static_cast<std::size_t>(ix.dh));
        hbuf.resize(static_cast<std::size_t>(ix.dh));
        logits.resize(static_cast<std::size_t>(ix.k));
        mu.resize(static_cast<std::size_t>(ix.k));
        lv.resize(static_cast<std::size_t>(ix.k));
        terms.resize(static_cast<std::size_t>(ix.k));
    }
};

template <class S> std::span<const S> slice(std::span<const S> th, int off, int len) {
    return th.subspan(static_cast<std::size_t>(off), static_cast<std::size_t>(len));
}

// Conditioner + the three mixture heads for coordinate i, evaluated on the
// standardized prefix xs[0..i) and conditioning vector zs. Fills
// ws.logits/mu/lv.
template <class S>
void eval_heads(const FlowIndex& ix, std::span<const S> th, int i, std::span<const double> xs,
                std::span<const double> zs, Workspace<S>& ws) {
    const DimOffsets& o = ix.dims[static_cast<std::size_t>(i)];
    const int dh = ix.dh, k = ix.k;

    if (o.cond_in == 0) {
        for (int j = 0; j < dh; ++j) ws.h[static_cast<std::size_t>(j)] = th[static_cast<std::size_t>(o.cond_const + j)];
    } else {
        for (int a = 0; a < i; ++a) ws.cond_in[static_cast<std::size_t>(a)] = xs[static_cast<std::size_t>(a)];
        for (int b = 0; b < ix.dz; ++b) ws.cond_in[static_cast<std::size_t>(i + b)] = zs[static_cast<std::size_t>(b)];
        nn::mlp_eval<S, double>(slice(th, o.cond_w1, dh * o.cond_in), slice(th, o.cond_b1, dh),
                                slice(th, o.cond_w2, dh * dh), slice(th, o.cond_b2, dh), o.cond_in, dh, dh,
                                std::span<const double>(ws.cond_in.data(), static_cast<std::size_t>(o.cond_in)),
                                std::span<S>(ws.hbuf), std::span<S>(ws.h));
    }

    nn::mlp_eval<S, S>(slice(th, o.w_w1, dh * dh), slice(th, o.w_b1, dh), slice(th, o.w_w2, k * dh),
                       slice(th, o.w_b2, k), dh, dh, k, std::span<const S>(ws.h), std::span<S>(ws.hbuf),
                       std::span<S>(ws.logits));
    nn::mlp_eval<S, S>(slice(th, o.mu_w1, dh * dh), slice(th, o.mu_b1, dh), slice(th, o.mu_w2, k * dh),
                       slice(th, o.mu_b2, k), dh, dh, k, std::span<const S>(ws.h), std::span<S>(ws.hbuf),
                       std::span<S>(ws.mu));
    nn::mlp_eval<S, S>(slice(th, o.lv_w1, dh * dh), slice(th, o.lv_b1, dh), slice(th, o.lv_w2, k * dh),
                       slice(th, o.lv_b2, k), dh, dh, k, std::span<const S>(ws.h), std::span<S>(ws.hbuf),
                       std::span<S>(ws.lv));
}

// Mixture-of-Gaussian-CDFs coordinate map. Returns the mixture log-density of
// the standardized coordinate xs (without the -ln(2*pi)/2 constant, added
// once per sample) and optionally the CDF value u.
template <class S, bool WantU> S coord_mixture(Workspace<S>& ws, double xs, S* u_out) {
    using nn::clamp_val;
    using nn::max2;
    using nn::norm_cdf;
    using std::exp;
    using std::log;
    using nn::exp;
    using nn::log;

    const int k = static_cast<int>(ws.logits.size());

    // log-softmax normalizer of the component weights
    S m = ws.logits[0];
    for (int j = 1; j < k; ++j) m = max2(m, ws.logits[static_cast<std::size_t>(j)]);
    S se = exp(ws.logits[0] - m);
    for (int j = 1; j < k; ++j) se = se + exp(ws.logits[static_cast<std::size_t>(j)] - m);
    S lse = m + log(se);

    for (int j = 0; j < k; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        S lv = clamp_val(ws.lv[ju], -kLogVarClamp, kLogVarClamp);
        S inv_sigma = exp(lv * (-0.5));
        S t = (xs - ws.mu[ju]) * inv_sigma;
        S lw = ws.logits[ju] - lse;
        ws.terms[ju] = lw - 0.5 * lv - 0.5 * (t * t);
        if constexpr (WantU) {
            S contrib = exp(lw) * norm_cdf(t);
            if (j == 0)
                *u_out = contrib;
            else
                *u_out = *u_out + contrib;
        }
    }

    S tm = ws.terms[0];
    for (int j = 1; j < k; ++j) tm = max2(tm, ws.terms[static_cast<std::size_t>(j)]);
    S s = exp(ws.terms[0] - tm);
    for (int j = 1; j < k; ++j) s = s + exp(ws.terms[static_cast<std::size_t>(j)] - tm);
    return tm + log(s);
}

// Full log-density of one standardized sample; u_out (size d) only when
// requested. The autoregressive structure is explicit: coordinate i reads
// xs[0..i] and zs only.
template <class S, bool WantU>
S sample_pass(const FlowIndex& ix, std::span<const S> th, std::span<const double> xs, std::span<const double> zs,
              Workspace<S>& ws, S* u_out) {
    S total{};
    for (int i = 0; i < ix.d; ++i) {
        eval_heads<S>(ix, th, i, xs, zs, ws);
        S lp = coord_mixture<S, WantU>(ws, xs[static_cast<std::size_t>(i)], WantU ? u_out + i : nullptr);
        total = (i == 0) ? lp : total + lp;
    }
    return total - 0.5 * nn::kLnTwoPi * ix.d;
}

// Frozen per-coordinate mixture for repeated CDF evaluations (inversion).
struct FrozenMixture {
    std::vector<double> w, mu, inv_sigma;

    void from_workspace(const Workspace<double>& ws) {
        const std::size_t k = ws.logits.size();
        w.assign(ws.logits.begin(), ws.logits.end());
        nn::softmax_inplace<double>(std::span<double>(w));
        mu.assign(ws.mu.begin(), ws.mu.end());
        inv_sigma.resize(k);
        for (std::size_t j = 0; j < k; ++j)
            inv_sigma[j] = std::exp(-0.5 * nn::clamp_val(ws.lv[j], -kLogVarClamp, kLogVarClamp));
    }

    double cdf(double t) const {
        double u = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) u += w[j] * nn::norm_cdf((t - mu[j]) * inv_sigma[j]);
        return u;
    }
};

} // namespace flowmi::flow::detail
