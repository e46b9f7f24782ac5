#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "flowmi/error.hpp"
#include "flowmi/nn/special.hpp"

namespace flowmi::nn {

// Reverse-mode tape. Each node stores at most two parents together with the
// local partial derivatives, computed eagerly during the forward build, so
// the backward sweep is a single generic loop. Tapes are plain objects with
// no global state: one per execution context, reused via clear().
class Tape {
  public:
    struct Var {
        std::int32_t i = -1;
    };

    void clear() {
        nodes_.clear();
        val_.clear();
    }

    // Drops every node past the first `keep`; lets callers rebuild only the
    // part of the expression that changed (e.g. per-sample graphs sharing one
    // block of parameter leaves).
    void truncate(int keep) {
        nodes_.resize(static_cast<std::size_t>(keep));
        val_.resize(static_cast<std::size_t>(keep));
    }

    int size() const { return static_cast<int>(nodes_.size()); }

    double value(Var v) const { return val_[static_cast<std::size_t>(v.i)]; }
    double adjoint(Var v) const { return adj_[static_cast<std::size_t>(v.i)]; }

    Var leaf(double v) { return push(v, -1, -1, 0.0, 0.0); }

    // Pushes one leaf per scalar; leaves occupy indices [0, values.size()).
    // Intended to be called on a fresh/cleared tape.
    void leaf_block(std::span<const double> values) {
        for (double v : values) leaf(v);
    }

    Var add(Var a, Var b) { return push(value(a) + value(b), a.i, b.i, 1.0, 1.0); }
    Var sub(Var a, Var b) { return push(value(a) - value(b), a.i, b.i, 1.0, -1.0); }
    Var mul(Var a, Var b) { return push(value(a) * value(b), a.i, b.i, value(b), value(a)); }
    Var div(Var a, Var b) {
        const double vb = value(b);
        return push(value(a) / vb, a.i, b.i, 1.0 / vb, -value(a) / (vb * vb));
    }
    Var neg(Var a) { return push(-value(a), a.i, -1, -1.0, 0.0); }
    Var add_c(Var a, double c) { return push(value(a) + c, a.i, -1, 1.0, 0.0); }
    Var mul_c(Var a, double c) { return push(value(a) * c, a.i, -1, c, 0.0); }

    Var exp_(Var a) {
        const double e = std::exp(value(a));
        return push(e, a.i, -1, e, 0.0);
    }
    Var log_(Var a) { return push(std::log(value(a)), a.i, -1, 1.0 / value(a), 0.0); }
    Var relu_(Var a) {
        const double v = value(a);
        return v > 0.0 ? push(v, a.i, -1, 1.0, 0.0) : push(0.0, a.i, -1, 0.0, 0.0);
    }
    Var max2_(Var a, Var b) {
        const double va = value(a), vb = value(b);
        return va >= vb ? push(va, a.i, b.i, 1.0, 0.0) : push(vb, a.i, b.i, 0.0, 1.0);
    }
    Var clamp_(Var a, double lo, double hi) {
        const double v = value(a);
        if (v < lo) return push(lo, a.i, -1, 0.0, 0.0);
        if (v > hi) return push(hi, a.i, -1, 0.0, 0.0);
        return push(v, a.i, -1, 1.0, 0.0);
    }
    Var norm_cdf_(Var a) { return push(norm_cdf(value(a)), a.i, -1, norm_pdf(value(a)), 0.0); }

    // Seeds d(root)/d(root) = 1 and sweeps the whole tape. Adjoints of every
    // node (leaves included) are available afterwards via adjoint().
    void backward(Var root) {
        adj_.assign(nodes_.size(), 0.0);
        adj_[static_cast<std::size_t>(root.i)] = 1.0;
        for (std::int32_t i = root.i; i >= 0; --i) {
            const double a = adj_[static_cast<std::size_t>(i)];
            if (a == 0.0) continue;
            const Node& n = nodes_[static_cast<std::size_t>(i)];
            if (n.p0 >= 0) adj_[static_cast<std::size_t>(n.p0)] += n.d0 * a;
            if (n.p1 >= 0) adj_[static_cast<std::size_t>(n.p1)] += n.d1 * a;
        }
    }

  private:
    struct Node {
        double d0, d1;
        std::int32_t p0, p1;
    };

    Var push(double v, std::int32_t p0, std::int32_t p1, double d0, double d1) {
        nodes_.push_back(Node{d0, d1, p0, p1});
        val_.push_back(v);
        return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
    }

    std::vector<Node> nodes_;
    std::vector<double> val_;
    std::vector<double> adj_;
};

// Value handle with operator overloads, so generic numeric kernels can be
// instantiated for either double or Rev. Carries its tape explicitly.
struct Rev {
    Tape* tape = nullptr;
    Tape::Var v;

    double value() const { return tape->value(v); }
};

inline Rev make_rev(Tape& t, Tape::Var v) { return Rev{&t, v}; }

inline Rev operator+(Rev a, Rev b) { return {a.tape, a.tape->add(a.v, b.v)}; }
inline Rev operator-(Rev a, Rev b) { return {a.tape, a.tape->sub(a.v, b.v)}; }
inline Rev operator*(Rev a, Rev b) { return {a.tape, a.tape->mul(a.v, b.v)}; }
inline Rev operator/(Rev a, Rev b) { return {a.tape, a.tape->div(a.v, b.v)}; }
inline Rev operator-(Rev a) { return {a.tape, a.tape->neg(a.v)}; }

inline Rev operator+(Rev a, double c) { return {a.tape, a.tape->add_c(a.v, c)}; }
inline Rev operator+(double c, Rev a) { return a + c; }
inline Rev operator-(Rev a, double c) { return {a.tape, a.tape->add_c(a.v, -c)}; }
inline Rev operator-(double c, Rev a) { return {a.tape, a.tape->add_c(a.tape->neg(a.v), c)}; }
inline Rev operator*(Rev a, double c) { return {a.tape, a.tape->mul_c(a.v, c)}; }
inline Rev operator*(double c, Rev a) { return a * c; }
inline Rev operator/(Rev a, double c) { return {a.tape, a.tape->mul_c(a.v, 1.0 / c)}; }

inline Rev exp(Rev a) { return {a.tape, a.tape->exp_(a.v)}; }
inline Rev log(Rev a) { return {a.tape, a.tape->log_(a.v)}; }
inline Rev relu(Rev a) { return {a.tape, a.tape->relu_(a.v)}; }
inline Rev max2(Rev a, Rev b) { return {a.tape, a.tape->max2_(a.v, b.v)}; }
inline Rev clamp_val(Rev a, double lo, double hi) { return {a.tape, a.tape->clamp_(a.v, lo, hi)}; }
inline Rev norm_cdf(Rev a) { return {a.tape, a.tape->norm_cdf_(a.v)}; }

// Uniform scalar access for generic code.
inline double scalar_value(double x) { return x; }
inline double scalar_value(Rev x) { return x.value(); }

} // namespace flowmi::nn
