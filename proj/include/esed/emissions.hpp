#pragma once

#include <map>
#include <span>
#include <vector>

#include "esed/core.hpp"

namespace esed {

// Floor applied to point estimates before taking logs; the count-ratio
// solutions produce exact zeros for unseen tokens, which would assign zero
// probability to any document containing a new word.
inline constexpr double kEstimateFloor = 1e-10;

// Floors each component at kEstimateFloor and renormalizes.
std::vector<double> smooth_estimate(std::span<const double> estimate);

// sum_v count_v * log(topic_v). The topic is expected to be smoothed already.
double word_loglik(const std::map<int, int>& token_counts, std::span<const double> topic);

// log(region_weights[z]).
double region_logprob(int z, std::span<const double> region_weights);

// Log density of the bivariate Gaussian N(mean, cov) at (lat, lon).
double location_loglik(double lat, double lon, const Region& region);

}  // namespace esed
