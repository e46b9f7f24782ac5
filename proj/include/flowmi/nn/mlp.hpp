#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "flowmi/error.hpp"
#include "flowmi/nn/param.hpp"
#include "flowmi/nn/tape.hpp"
#include "flowmi/rng.hpp"

namespace flowmi::nn {

enum class Head { Linear, Softmax };

// One-hidden-layer perceptron: out = W2 * relu(W1 * x + b1) + b2, with an
// optional softmax on the output. Tensors live in a ParameterVector under
// "<prefix>.w1|b1|w2|b2".
struct Mlp {
    std::string prefix;
    int in = 0;
    int hidden = 0;
    int out = 0;
    Head head = Head::Linear;

    void register_tensors(LayoutBuilder& b) const {
        b.add(prefix + ".w1", {hidden, in});
        b.add(prefix + ".b1", {hidden});
        b.add(prefix + ".w2", {out, hidden});
        b.add(prefix + ".b2", {out});
    }

    // Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases.
    void init(ParameterVector& p, Rng& rng) const {
        const double s1 = std::sqrt(6.0 / (in + hidden));
        for (double& w : p.tensor(prefix + ".w1")) w = rng.uniform(-s1, s1);
        const double s2 = std::sqrt(6.0 / (hidden + out));
        for (double& w : p.tensor(prefix + ".w2")) w = rng.uniform(-s2, s2);
    }

    std::vector<double> forward(const ParameterVector& p, std::span<const double> input) const;
};

// Numerically shifted softmax; adding a constant to every logit leaves the
// result unchanged up to rounding.
template <class S> void softmax_inplace(std::span<S> v) {
    using std::exp;
    S m = v[0];
    for (std::size_t i = 1; i < v.size(); ++i) m = max2(m, v[i]);
    S total = exp(v[0] - m);
    v[0] = exp(v[0] - m);
    for (std::size_t i = 1; i < v.size(); ++i) {
        v[i] = exp(v[i] - m);
        total = total + v[i];
    }
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = v[i] / total;
}

// Core evaluation shared by the plain and the differentiated paths.
// S: parameter scalar type (double or Rev); T: input scalar type.
// hbuf must have `hidden` elements; out must have `out` elements.
template <class S, class T>
void mlp_eval(std::span<const S> w1, std::span<const S> b1, std::span<const S> w2, std::span<const S> b2, int in,
              int hidden, int out, std::span<const T> x, std::span<S> hbuf, std::span<S> y) {
    for (int j = 0; j < hidden; ++j) {
        S acc = b1[static_cast<std::size_t>(j)];
        for (int i = 0; i < in; ++i) acc = acc + w1[static_cast<std::size_t>(j * in + i)] * x[static_cast<std::size_t>(i)];
        hbuf[static_cast<std::size_t>(j)] = relu(acc);
    }
    for (int o = 0; o < out; ++o) {
        S acc = b2[static_cast<std::size_t>(o)];
        for (int j = 0; j < hidden; ++j)
            acc = acc + w2[static_cast<std::size_t>(o * hidden + j)] * hbuf[static_cast<std::size_t>(j)];
        y[static_cast<std::size_t>(o)] = acc;
    }
}

inline std::vector<double> Mlp::forward(const ParameterVector& p, std::span<const double> input) const {
    if (static_cast<int>(input.size()) != in)
        throw ConfigError("Mlp::forward: input length " + std::to_string(input.size()) + " does not match input_dim " +
                          std::to_string(in));
    std::vector<double> h(static_cast<std::size_t>(hidden));
    std::vector<double> y(static_cast<std::size_t>(out));
    mlp_eval<double, double>(p.tensor(prefix + ".w1"), p.tensor(prefix + ".b1"), p.tensor(prefix + ".w2"),
                             p.tensor(prefix + ".b2"), in, hidden, out, input, h, y);
    if (head == Head::Softmax) softmax_inplace<double>(y);
    return y;
}

} // namespace flowmi::nn
