#include "esed/laplace.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace esed {

namespace {

void check_dims(const CountContext& ctx) {
    if (ctx.prior_probs.size() != ctx.current_counts.size() ||
        (!ctx.historical_counts.empty() &&
         ctx.historical_counts.size() != ctx.current_counts.size()))
        throw std::invalid_argument("CountContext: mismatched dimensions");
}

}  // namespace

std::vector<double> pseudo_counts(const CountContext& ctx) {
    check_dims(ctx);
    if (!(ctx.total > 0.0)) throw std::invalid_argument("pseudo_counts: total must be > 0");
    std::vector<double> out(ctx.prior_probs.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ctx.total * ctx.prior_probs[i];
    return out;
}

std::vector<double> solution1(const CountContext& ctx) {
    if (!(ctx.total > 0.0)) throw std::invalid_argument("solution1: total must be > 0");
    std::vector<double> out(ctx.current_counts.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ctx.current_counts[i] / ctx.total;
    return out;
}

std::vector<double> solution2(const CountContext& ctx) {
    double total = 0.0;
    for (double c : ctx.historical_counts) total += c;
    if (!(total > 0.0)) throw std::invalid_argument("solution2: empty history");
    std::vector<double> out(ctx.historical_counts.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ctx.historical_counts[i] / total;
    return out;
}

std::vector<double> solution3(const CountContext& ctx) {
    check_dims(ctx);
    if (!(ctx.total > 0.0)) throw std::invalid_argument("solution3: total must be > 0");
    if (!(ctx.scale > 0.0)) throw std::invalid_argument("solution3: scale must be > 0");
    const double w_prior = 1.0 / (1.0 + ctx.scale);
    const double w_current = ctx.scale / (1.0 + ctx.scale);
    std::vector<double> out(ctx.current_counts.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        double pseudo = ctx.total * ctx.prior_probs[i];
        out[i] = (w_prior * pseudo + w_current * ctx.current_counts[i]) / ctx.total;
    }
    return out;
}

double lambert_w0(double x) {
    constexpr double kInvE = 0.36787944117144233;  // 1/e
    if (x < -kInvE) {
        if (x > -kInvE - 1e-15) x = -kInvE;  // absorb rounding at the branch point
        else throw std::domain_error("lambert_w0: x < -1/e");
    }
    if (x == 0.0) return 0.0;

    double w;
    if (x < -0.3) {
        // Series around the branch point in p = sqrt(2(1 + e x)).
        double p = std::sqrt(2.0 * (1.0 + M_E * x));
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
    } else if (x < M_E) {
        w = std::log1p(x);  // rough seed; Halley does the rest
    } else {
        double l1 = std::log(x);
        double l2 = std::log(l1);
        w = l1 - l2 + l2 / l1;
    }

    // Halley iteration on f(w) = w e^w - x.
    for (int iter = 0; iter < 100; ++iter) {
        double ew = std::exp(w);
        double f = w * ew - x;
        if (std::abs(f) <= 1e-13 * std::max(1.0, std::abs(x))) break;
        double df = ew * (w + 1.0);
        double d2f = ew * (w + 2.0);
        double step = f / (df - 0.5 * f * d2f / df);
        double next = w - step;
        if (next < -1.0) next = -1.0 + 0.5 * (w + 1.0);  // stay on the principal branch
        if (next == w) break;
        w = next;
    }
    return w;
}

std::vector<double> fixed_point_oracle(const CountContext& ctx) {
    check_dims(ctx);
    if (!(ctx.total > 0.0)) throw std::invalid_argument("fixed_point_oracle: total must be > 0");
    if (!(ctx.scale > 0.0)) throw std::invalid_argument("fixed_point_oracle: scale must be > 0");

    const double s2 = ctx.scale * ctx.scale;
    const double coef = s2 * ctx.total / 2.0;
    std::vector<double> out(ctx.current_counts.size(), 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (ctx.prior_probs[i] <= 0.0) {
            out[i] = 0.0;  // theta = -inf pins the stationary point at e^{pi} = 0
            continue;
        }
        // Solve  pi + coef e^{pi} = rhs  for pi, rhs = theta_i + s^2 n_i / 2,
        // where theta_i = log(total * prior_i / total) = log(prior_i).
        const double theta = std::log(ctx.total * ctx.prior_probs[i] / ctx.total);
        const double rhs = theta + s2 * ctx.current_counts[i] / 2.0;
        auto f = [&](double pi) { return pi + coef * std::exp(pi) - rhs; };

        double hi = std::min(rhs, 700.0);
        while (f(hi) < 0.0) hi += 1.0;
        double lo = hi - 1.0;
        while (f(lo) > 0.0) {
            hi = lo;
            lo = (lo > 0.0) ? lo * 0.5 - 1.0 : lo * 2.0 - 1.0;
            if (lo < -1e6) break;
        }
        if (f(lo) > 0.0) throw std::runtime_error("fixed_point_oracle: failed to bracket root");
        for (int iter = 0; iter < 200; ++iter) {
            double mid = 0.5 * (lo + hi);
            if (mid == lo || mid == hi) break;
            (f(mid) < 0.0 ? lo : hi) = mid;
        }
        double pi = 0.5 * (lo + hi);
        // Newton polish.
        for (int iter = 0; iter < 8; ++iter) {
            double e = std::exp(pi);
            double val = pi + coef * e - rhs;
            double der = 1.0 + coef * e;
            double next = pi - val / der;
            if (!std::isfinite(next) || next == pi) break;
            pi = next;
        }
        out[i] = std::exp(pi);
    }
    // The stationarity condition is derived under the convention that the
    // components already sum to one, so e^{pi_i} is itself the probability;
    // renormalizing here would push edge components out of the count /
    // pseudo-count envelope the root provably lies in.
    return out;
}

}  // namespace esed
