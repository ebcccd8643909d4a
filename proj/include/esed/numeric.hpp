#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace esed {

// log(sum_i exp(x_i)) with max-subtraction.
inline double log_sum_exp(std::span<const double> x) {
    if (x.empty()) throw std::invalid_argument("log_sum_exp: empty input");
    double m = x[0];
    for (double v : x)
        if (v > m) m = v;
    if (!std::isfinite(m)) return m;  // all -inf (or a +inf dominates)
    double s = 0.0;
    for (double v : x) s += std::exp(v - m);
    return m + std::log(s);
}

// Componentwise softmax; output sums to 1.
inline std::vector<double> logistic(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("logistic: empty input");
    double m = v[0];
    for (double x : v)
        if (x > m) m = x;
    std::vector<double> out(v.size());
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - m);
        s += out[i];
    }
    for (double& x : out) x /= s;
    return out;
}

// Counter-based splitmix64 generator. A stream is fully determined by its
// seed, so per-(particle, document) streams make results independent of
// thread scheduling.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller.
    double next_gaussian() {
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Index drawn proportionally to exp(logits[i]).
    int next_categorical_logits(std::span<const double> logits) {
        if (logits.empty()) throw std::invalid_argument("categorical: empty logits");
        double m = logits[0];
        for (double v : logits)
            if (v > m) m = v;
        double total = 0.0;
        for (double v : logits) total += std::exp(v - m);
        if (!(total > 0.0)) throw std::runtime_error("categorical: all masses zero");
        double u = next_double() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < logits.size(); ++i) {
            acc += std::exp(logits[i] - m);
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(logits.size()) - 1;
    }

    // Index drawn proportionally to nonnegative weights.
    int next_categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (!(total > 0.0)) throw std::runtime_error("categorical: all weights zero");
        double u = next_double() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(weights.size()) - 1;
    }

  private:
    std::uint64_t state_;
};

// Mixes components into a single stream seed.
inline std::uint64_t derive_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
    auto mix = [](std::uint64_t z) {
        z = (z ^ (z >> 33)) * 0xff51afd7ed558ccdULL;
        z = (z ^ (z >> 33)) * 0xc4ceb9fe1a85ec53ULL;
        return z ^ (z >> 33);
    };
    return mix(mix(mix(a) + b) + c);
}

}  // namespace esed
