#pragma once

#include <cstdint>
#include <string>

#include "flowmi/est/estimator.hpp"
#include "flowmi/matrix.hpp"

namespace flowmi::gen {

enum class ZFamily { Uniform, Normal, Laplace };

// Strictly monotone maps applied elementwise to the standardized
// pre-activations. `Reciprocal` and `Log` first shift their input to
// (0.1, 9.9); inputs beyond +-4.9 are clipped to the boundary and counted.
enum class Bijection { ScaledLinear, Cube, ExpNeg, Reciprocal, Log, Sigmoid };

std::string to_string(ZFamily f);
std::string to_string(Bijection b);
ZFamily z_family_from_string(const std::string& s);
Bijection bijection_from_string(const std::string& s);

struct ScenarioConfig {
    int n = 1000;
    int d = 1;    // shared dimension of x and y
    int d_z = 0;  // conditioning dimension (0 = plain MI scenario)
    double rho = 0.0;
    ZFamily z_family = ZFamily::Normal;
    Bijection f_choice = Bijection::Cube;
    Bijection g_choice = Bijection::Cube;
    std::uint64_t seed = 0;

    void validate() const;
};

struct GeneratedScenario {
    est::Dataset dataset;
    double ground_truth_cmi = 0.0;
    ScenarioConfig config;
    Matrix mixing_a, mixing_b; // d x d_z
    // diagnostics: the jointly Gaussian latents behind x and y
    Matrix latent_x, latent_y;
    long clip_events = 0;
};

// Closed-form target: -(d/2) ln(1 - rho^2). Requires |rho| < 1.
double ground_truth_cmi(double rho, int d);

// Draws the correlated Gaussian latents through the explicit 2d x 2d block
// covariance, the conditioning variable from its family, the mixing matrices
// with standard normal entries, and applies the chosen bijections to the
// standardized pre-activations. Bit-reproducible from the seed.
GeneratedScenario generate(const ScenarioConfig& cfg);

// Scenario with z-family and both bijections drawn uniformly from their sets
// (choice stream separate from the data stream).
ScenarioConfig draw_scenario_config(int n, int d, int d_z, double rho, std::uint64_t seed);

// Independent brute-force MI check for a pair of scalar columns: equal-mass
// 2-D histogram, plug-in entropy sums, small-cell bias correction. Test
// oracle quality only (~0.05 nats at n = 5000 for smooth densities).
double oracle_mi_gaussian_2d(const Matrix& samples_x, const Matrix& samples_y);

} // namespace flowmi::gen
