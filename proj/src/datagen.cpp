#include "flowmi/gen/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "flowmi/error.hpp"
#include "flowmi/est/linalg.hpp"
#include "flowmi/rng.hpp"

namespace flowmi::gen {

namespace {
constexpr std::uint64_t kDataStream = 0xD0;
constexpr std::uint64_t kChoiceStream = 0xC0;
constexpr double kClipLimit = 4.9;
} // namespace

std::string to_string(ZFamily f) {
    switch (f) {
    case ZFamily::Uniform: return "uniform";
    case ZFamily::Normal: return "normal";
    case ZFamily::Laplace: return "laplace";
    }
    return "?";
}

std::string to_string(Bijection b) {
    switch (b) {
    case Bijection::ScaledLinear: return "linear";
    case Bijection::Cube: return "cube";
    case Bijection::ExpNeg: return "expneg";
    case Bijection::Reciprocal: return "reciprocal";
    case Bijection::Log: return "log";
    case Bijection::Sigmoid: return "sigmoid";
    }
    return "?";
}

ZFamily z_family_from_string(const std::string& s) {
    if (s == "uniform") return ZFamily::Uniform;
    if (s == "normal") return ZFamily::Normal;
    if (s == "laplace") return ZFamily::Laplace;
    throw ConfigError("unknown z family '" + s + "' (uniform|normal|laplace)");
}

Bijection bijection_from_string(const std::string& s) {
    if (s == "linear") return Bijection::ScaledLinear;
    if (s == "cube") return Bijection::Cube;
    if (s == "expneg") return Bijection::ExpNeg;
    if (s == "reciprocal") return Bijection::Reciprocal;
    if (s == "log") return Bijection::Log;
    if (s == "sigmoid") return Bijection::Sigmoid;
    throw ConfigError("unknown bijection '" + s + "' (linear|cube|expneg|reciprocal|log|sigmoid)");
}

void ScenarioConfig::validate() const {
    if (n < 2) throw ConfigError("ScenarioConfig: n must be >= 2");
    if (d < 1) throw ConfigError("ScenarioConfig: d must be >= 1");
    if (d_z < 0) throw ConfigError("ScenarioConfig: d_z must be >= 0");
    if (!(std::abs(rho) < 1.0)) throw ConfigError("ScenarioConfig: |rho| must be < 1");
}

double ground_truth_cmi(double rho, int d) {
    if (!(std::abs(rho) < 1.0)) throw DomainError("ground_truth_cmi: |rho| must be < 1");
    if (d < 1) throw DomainError("ground_truth_cmi: d must be positive");
    return -0.5 * d * std::log(1.0 - rho * rho);
}

namespace {

double apply_bijection(Bijection b, double v, long& clip_events) {
    switch (b) {
    case Bijection::ScaledLinear:
        return 2.0 * v;
    case Bijection::Cube:
        return v * v * v;
    case Bijection::ExpNeg:
        return std::exp(-v);
    case Bijection::Reciprocal:
    case Bijection::Log: {
        double c = v;
        if (c > kClipLimit) {
            c = kClipLimit;
            ++clip_events;
        } else if (c < -kClipLimit) {
            c = -kClipLimit;
            ++clip_events;
        }
        const double arg = c + 5.0; // in (0.1, 9.9)
        if (!(arg > 0.0)) throw Error("generate: bijection domain violation after scaling");
        return b == Bijection::Reciprocal ? 1.0 / arg : std::log(arg);
    }
    case Bijection::Sigmoid:
        return 1.0 / (1.0 + std::exp(-v));
    }
    throw ConfigError("generate: unknown bijection");
}

void standardize_columns(Matrix& m) {
    const auto mean = m.col_mean();
    const auto var = m.col_var();
    for (int j = 0; j < m.cols(); ++j) {
        const double s = std::sqrt(var[static_cast<std::size_t>(j)]);
        const double inv = s > 1e-12 ? 1.0 / s : 1.0;
        for (int i = 0; i < m.rows(); ++i) m.at(i, j) = (m.at(i, j) - mean[static_cast<std::size_t>(j)]) * inv;
    }
}

} // namespace

GeneratedScenario generate(const ScenarioConfig& cfg) {
    cfg.validate();
    const int n = cfg.n, d = cfg.d, dz = cfg.d_z;

    GeneratedScenario out;
    out.config = cfg;
    out.ground_truth_cmi = ground_truth_cmi(cfg.rho, d);

    Rng rng(mix_seed(cfg.seed, kDataStream));

    // mixing matrices, standard normal entries, row-major draw order
    out.mixing_a = Matrix(d, dz);
    out.mixing_b = Matrix(d, dz);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < dz; ++j) out.mixing_a.at(i, j) = rng.normal();
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < dz; ++j) out.mixing_b.at(i, j) = rng.normal();

    // block covariance [[I, rho I], [rho I, I]] and its triangular factor
    est::CovarianceMatrix block(2 * d);
    for (int i = 0; i < 2 * d; ++i) block.at(i, i) = 1.0;
    for (int i = 0; i < d; ++i) {
        block.at(i, d + i) = cfg.rho;
        block.at(d + i, i) = cfg.rho;
    }
    const auto chol = est::cholesky(block);

    Matrix z(n, dz);
    out.latent_x = Matrix(n, d);
    out.latent_y = Matrix(n, d);
    std::vector<double> g(static_cast<std::size_t>(2 * d));

    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < dz; ++j) {
            double zj = 0.0;
            switch (cfg.z_family) {
            case ZFamily::Uniform: zj = rng.uniform(-0.01, 0.01); break;
            case ZFamily::Normal: zj = 0.1 * rng.normal(); break; // covariance 0.01
            case ZFamily::Laplace: zj = rng.laplace(0.01); break;
            }
            z.at(i, j) = zj;
        }
        for (int j = 0; j < 2 * d; ++j) g[static_cast<std::size_t>(j)] = rng.normal();
        for (int r = 0; r < 2 * d; ++r) {
            double s = 0.0;
            for (int c = 0; c <= r; ++c) s += chol[static_cast<std::size_t>(r) * (2 * d) + c] * g[static_cast<std::size_t>(c)];
            if (r < d)
                out.latent_x.at(i, r) = s;
            else
                out.latent_y.at(i, r - d) = s;
        }
    }

    // pre-activations v = A z + latent, standardized per column before the bijections
    Matrix vx(n, d), vy(n, d);
    for (int i = 0; i < n; ++i)
        for (int r = 0; r < d; ++r) {
            double ax = 0.0, by = 0.0;
            for (int c = 0; c < dz; ++c) {
                ax += out.mixing_a.at(r, c) * z.at(i, c);
                by += out.mixing_b.at(r, c) * z.at(i, c);
            }
            vx.at(i, r) = ax + out.latent_x.at(i, r);
            vy.at(i, r) = by + out.latent_y.at(i, r);
        }
    standardize_columns(vx);
    standardize_columns(vy);

    Matrix x(n, d), y(n, d);
    for (int i = 0; i < n; ++i)
        for (int r = 0; r < d; ++r) {
            x.at(i, r) = apply_bijection(cfg.f_choice, vx.at(i, r), out.clip_events);
            y.at(i, r) = apply_bijection(cfg.g_choice, vy.at(i, r), out.clip_events);
        }

    out.dataset = est::Dataset{std::move(x), std::move(y), std::move(z)};
    return out;
}

ScenarioConfig draw_scenario_config(int n, int d, int d_z, double rho, std::uint64_t seed) {
    Rng rng(mix_seed(seed, kChoiceStream));
    ScenarioConfig cfg;
    cfg.n = n;
    cfg.d = d;
    cfg.d_z = d_z;
    cfg.rho = rho;
    cfg.seed = seed;
    cfg.z_family = static_cast<ZFamily>(rng.below(3));
    cfg.f_choice = static_cast<Bijection>(rng.below(6));
    cfg.g_choice = static_cast<Bijection>(rng.below(6));
    cfg.validate();
    return cfg;
}

double oracle_mi_gaussian_2d(const Matrix& samples_x, const Matrix& samples_y) {
    if (samples_x.cols() != 1 || samples_y.cols() != 1)
        throw DataError("oracle_mi_gaussian_2d: expects single-column inputs");
    const int n = samples_x.rows();
    if (samples_y.rows() != n) throw DataError("oracle_mi_gaussian_2d: row counts disagree");
    if (n < 100) throw DataError("oracle_mi_gaussian_2d: need at least 100 samples");

    const int bins = 32;

    // equal-mass bin edges per margin
    auto edges_of = [n](const Matrix& m) {
        std::vector<double> sorted(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) sorted[static_cast<std::size_t>(i)] = m.at(i, 0);
        std::sort(sorted.begin(), sorted.end());
        if (sorted.front() == sorted.back()) throw DataError("oracle_mi_gaussian_2d: degenerate (constant) column");
        std::vector<double> edges(bins - 1);
        for (int b = 1; b < bins; ++b) edges[static_cast<std::size_t>(b - 1)] = sorted[static_cast<std::size_t>(b * n / bins)];
        return edges;
    };
    const auto ex = edges_of(samples_x);
    const auto ey = edges_of(samples_y);

    auto bin_of = [](const std::vector<double>& edges, double v) {
        return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
    };

    std::vector<long> joint(static_cast<std::size_t>(bins) * bins, 0);
    std::vector<long> cx(bins, 0), cy(bins, 0);
    for (int i = 0; i < n; ++i) {
        const int bx = bin_of(ex, samples_x.at(i, 0));
        const int by = bin_of(ey, samples_y.at(i, 0));
        ++joint[static_cast<std::size_t>(bx) * bins + by];
        ++cx[static_cast<std::size_t>(bx)];
        ++cy[static_cast<std::size_t>(by)];
    }

    double mi = 0.0;
    long nonempty_joint = 0;
    for (int a = 0; a < bins; ++a)
        for (int b = 0; b < bins; ++b) {
            const long c = joint[static_cast<std::size_t>(a) * bins + b];
            if (c == 0) continue;
            ++nonempty_joint;
            const double pij = static_cast<double>(c) / n;
            const double pi = static_cast<double>(cx[static_cast<std::size_t>(a)]) / n;
            const double pj = static_cast<double>(cy[static_cast<std::size_t>(b)]) / n;
            mi += pij * std::log(pij / (pi * pj));
        }
    long nonempty_x = 0, nonempty_y = 0;
    for (long c : cx) nonempty_x += c > 0 ? 1 : 0;
    for (long c : cy) nonempty_y += c > 0 ? 1 : 0;

    // Miller-Madow style correction of the plug-in bias
    const double correction = static_cast<double>(nonempty_joint - nonempty_x - nonempty_y + 1) / (2.0 * n);
    return mi - correction;
}

} // namespace flowmi::gen
