#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "flowmi/matrix.hpp"
#include "flowmi/nn/mlp.hpp"
#include "flowmi/nn/param.hpp"
#include "flowmi/parallel.hpp"

namespace flowmi::flow {

namespace detail {
struct FlowIndex;
}

struct TrainConfig {
    int epochs = 100;
    int batch_size = 64;
    double learning_rate = 1e-2;
    std::uint64_t seed = 0;
};

struct FlowConfig {
    int data_dim = 1;       // d
    int cond_dim = 0;       // conditioning dimension, 0 for plain MI
    int n_components = 16;  // mixture components per coordinate
    int hidden_dim = 4;     // MLP hidden units (also the conditioner output width)
    TrainConfig train;
};

// Per-column affine map fitted on the training sample. An affine map of the
// inputs is itself invertible and independent of the conditioning variable,
// so it changes neither the information content nor the contracts here; it
// only keeps mixture initialization on a sane scale.
struct Standardizer {
    std::vector<double> shift;
    std::vector<double> scale;

    void identity(int dim) {
        shift.assign(static_cast<std::size_t>(dim), 0.0);
        scale.assign(static_cast<std::size_t>(dim), 1.0);
    }
    void fit(const Matrix& m);
    double apply(int j, double x) const { return (x - shift[static_cast<std::size_t>(j)]) / scale[static_cast<std::size_t>(j)]; }
    double invert(int j, double s) const { return s * scale[static_cast<std::size_t>(j)] + shift[static_cast<std::size_t>(j)]; }
    double log_scale_sum() const;
};

struct TransformResult {
    std::vector<double> u;    // componentwise in (0, 1)
    double log_jacobian = 0;  // ln |du/dx|, which is also the model log-density
};

// Conditional autoregressive flow. Coordinate i is pushed through a mixture
// of Gaussian CDFs whose weights/means/log-variances come from MLP heads fed
// by a conditioner on (x_<i, z). The base distribution is uniform on (0,1)^d,
// lifted to a standard Gaussian surrogate by the normal quantile function.
class ConditionalFlow {
  public:
    ConditionalFlow(FlowConfig cfg, std::uint64_t init_seed);

    const FlowConfig& config() const { return cfg_; }
    nn::ParameterVector& params() { return params_; }
    const nn::ParameterVector& params() const { return params_; }

    const Standardizer& input_standardizer() const { return x_std_; }
    const Standardizer& cond_standardizer() const { return z_std_; }
    void set_standardizers(Standardizer x_std, Standardizer z_std);

    // Forward map of one sample. u is strictly inside (0,1)^d and the
    // log-Jacobian equals the log-density of x given z (uniform base).
    TransformResult transform(std::span<const double> x, std::span<const double> z) const;

    double log_density(std::span<const double> x, std::span<const double> z) const;

    // Gaussian surrogate rows: norm_icdf(clamp(u)) elementwise.
    Matrix to_gaussian(const Matrix& x, const Matrix& z, Exec exec = Exec::Parallel) const;

    // Inverse of transform, solved coordinate by coordinate with bisection.
    std::vector<double> invert_transform(std::span<const double> u, std::span<const double> z) const;

    // --- training kernels (serial reference + parallel twin, bit-identical) ---

    // Sum over the selected rows of the negative log-likelihood in
    // standardized coordinates, with the gradient of that sum accumulated
    // into grad_out (size = params). Rows enter the reduction in index order
    // regardless of execution policy.
    double nll_grad_batch(const Matrix& x_std, const Matrix& z_std, std::span<const int> rows,
                          std::span<double> grad_out, Exec exec) const;

    // Per-row negative log-likelihood in standardized coordinates.
    std::vector<double> nll_rows(const Matrix& x_std, const Matrix& z_std, Exec exec) const;

    Matrix standardize_inputs(const Matrix& x) const;
    Matrix standardize_cond(const Matrix& z) const;

  private:
    friend struct FlowAccess;
    FlowConfig cfg_;
    nn::ParameterVector params_;
    Standardizer x_std_, z_std_;
    std::shared_ptr<const detail::FlowIndex> index_; // immutable offset table, shared across copies
};

// Value clamp applied to u before the Gaussian quantile; the quantile
// function diverges at the interval ends.
inline constexpr double kQuantileClamp = 1e-7;

// Joint maximum-likelihood training of two flows sharing the same
// conditioning variable and schedule. Parameters are disjoint, so one
// first-order update per batch drives both. Returns the per-epoch mean
// negative log-likelihood over the full data, in raw (unstandardized)
// coordinates.
std::vector<double> fit(ConditionalFlow& flow_x, ConditionalFlow& flow_y, const Matrix& x, const Matrix& y,
                        const Matrix& z, Exec exec = Exec::Parallel);

// Log-density value together with its parameter gradient for one sample;
// used by gradient-checking suites.
std::pair<double, nn::ParameterVector> log_density_grad(const ConditionalFlow& flow, std::span<const double> x,
                                                        std::span<const double> z);

} // namespace flowmi::flow
