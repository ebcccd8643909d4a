#pragma once

#include <vector>

namespace esed {

// Inputs for the Laplace point-estimate solutions. The same context serves
// the spatial parameter (scale rho0, dimension M) and the topical parameter
// (scale tau0, dimension V).
struct CountContext {
    std::vector<double> current_counts;     // n_{t,k,i}, current epoch
    double total = 0.0;                     // n_{t,k}
    std::vector<double> historical_counts;  // N_{k,i}, all epochs
    std::vector<double> prior_probs;        // previous epoch's estimate, simplex
    double scale = 1.0;                     // rho0 or tau0
};

// n' = total * prior_probs; the prior expressed as an equivalent count.
std::vector<double> pseudo_counts(const CountContext& ctx);

// Current-epoch count normalization.
std::vector<double> solution1(const CountContext& ctx);

// All-epoch count normalization.
std::vector<double> solution2(const CountContext& ctx);

// Convex combination of pseudo-counts and current counts,
//   [(1/(1+scale)) n'_i + (scale/(1+scale)) n_i] / total,
// the cancelled closed form of the Lambert-W bound interpolation.
std::vector<double> solution3(const CountContext& ctx);

// Principal branch of Lambert's W: returns w with w e^w = x, for x >= -1/e.
double lambert_w0(double x);

// Per-component root of the stationarity condition
//   theta_i + scale^2 n_i / 2 = pi_i + (scale^2 total / 2) e^{pi_i},
// solved numerically. The condition is derived assuming sum_j e^{pi_j} = 1,
// so e^{pi_i} is returned as the probability directly (the components sum
// to ~1 but not exactly). Test oracle only.
std::vector<double> fixed_point_oracle(const CountContext& ctx);

}  // namespace esed
