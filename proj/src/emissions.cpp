#include "esed/emissions.hpp"

#include <cmath>
#include <stdexcept>

namespace esed {

std::vector<double> smooth_estimate(std::span<const double> estimate) {
    std::vector<double> out(estimate.begin(), estimate.end());
    double z = 0.0;
    for (double& v : out) {
        if (v < kEstimateFloor) v = kEstimateFloor;
        z += v;
    }
    for (double& v : out) v /= z;
    return out;
}

double word_loglik(const std::map<int, int>& token_counts, std::span<const double> topic) {
    double ll = 0.0;
    for (const auto& [v, c] : token_counts) {
        if (v < 0 || static_cast<std::size_t>(v) >= topic.size())
            throw std::out_of_range("word_loglik: token id out of range");
        ll += c * std::log(topic[v]);
    }
    return ll;
}

double region_logprob(int z, std::span<const double> region_weights) {
    if (z < 0 || static_cast<std::size_t>(z) >= region_weights.size())
        throw std::out_of_range("region_logprob: region id out of range");
    return std::log(region_weights[z]);
}

double location_loglik(double lat, double lon, const Region& region) {
    const double det = region.det();
    if (!(det > 0.0)) throw std::invalid_argument("location_loglik: singular covariance");
    const double dx = lat - region.mean[0];
    const double dy = lon - region.mean[1];
    // Inverse of [a b; b c] is [c -b; -b a] / det.
    const double quad =
        (region.cov[2] * dx * dx - 2.0 * region.cov[1] * dx * dy + region.cov[0] * dy * dy) / det;
    return -std::log(2.0 * M_PI) - 0.5 * std::log(det) - 0.5 * quad;
}

}  // namespace esed
