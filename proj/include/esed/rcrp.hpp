#pragma once

#include <atomic>
#include <cmath>
#include <utility>
#include <vector>

#include "esed/core.hpp"

namespace esed {

// Exponentially decayed document mass of a cluster at epoch t:
//   sum_{d=0}^{delta} e^{-d/alpha} m_{t-d,k}
// Counts are expected to already exclude the document being sampled.
inline double decayed_mass(const ClusterState& state, int t, const Hyperparams& h) {
    // The past-epoch sum is memoized per (cluster, epoch). Clusters can be
    // shared between particles processed on different threads; racing writers
    // compute the identical value from the same frozen past counts, so
    // release/acquire on the epoch tag plus relaxed data make the memo safe.
    std::atomic_ref<int> memo_epoch(state.mass_memo_epoch);
    std::atomic_ref<int> memo_delta(state.mass_memo_delta);
    std::atomic_ref<double> memo_alpha(state.mass_memo_alpha);
    std::atomic_ref<double> memo_past(state.mass_memo_past);
    if (memo_epoch.load(std::memory_order_acquire) != t ||
        memo_delta.load(std::memory_order_relaxed) != h.delta ||
        memo_alpha.load(std::memory_order_relaxed) != h.alpha) {
        double past = 0.0;
        for (int d = 1; d <= h.delta; ++d) {
            int epoch = t - d;
            if (epoch < 0) break;
            int m = state.docs_at(epoch);
            if (m > 0) past += std::exp(-static_cast<double>(d) / h.alpha) * m;
        }
        memo_past.store(past, std::memory_order_relaxed);
        memo_delta.store(h.delta, std::memory_order_relaxed);
        memo_alpha.store(h.alpha, std::memory_order_relaxed);
        memo_epoch.store(t, std::memory_order_release);
        return state.docs_at(t) + past;
    }
    return state.docs_at(t) + memo_past.load(std::memory_order_relaxed);
}

struct PriorWeights {
    std::vector<double> existing;  // unnormalized, parallel to the cluster list
    double fresh = 0.0;            // weight gamma for "new cluster"
};

inline PriorWeights prior_weights(const std::vector<ClusterState>& clusters, int t,
                                  const Hyperparams& h) {
    PriorWeights w;
    w.existing.reserve(clusters.size());
    for (const auto& c : clusters) w.existing.push_back(decayed_mass(c, t, h));
    w.fresh = h.gamma;
    return w;
}

}  // namespace esed
