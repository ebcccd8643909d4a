#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "esed/core.hpp"
#include "esed/numeric.hpp"

namespace esed {

// Point estimates of one cluster at the current epoch, derived from live
// counts via the configured solution. Rebuilt lazily when the cluster's
// version changes.
struct EstimateCache {
    long version = -1;
    int epoch = -1;
    std::vector<double> topic;       // smoothed probabilities, size V
    std::vector<double> region;      // smoothed probabilities, size M
    std::vector<double> region_log;

    // log(topic[v]), memoized on first use. Most rebuilds only ever serve the
    // handful of token ids of the document that invalidated them, so the full
    // vocabulary-sized log pass is deferred. NaN marks a pending entry;
    // concurrent fills through atomic_ref write the identical value, so a
    // cache shared between resampled particle copies stays race-free.
    double topic_logp(int v) const {
        std::atomic_ref<double> slot(topic_log_[v]);
        double l = slot.load(std::memory_order_relaxed);
        if (std::isnan(l)) {
            l = std::log(topic[v]);
            slot.store(l, std::memory_order_relaxed);
        }
        return l;
    }
    void reset_logs() {
        topic_log_.assign(topic.size(), std::numeric_limits<double>::quiet_NaN());
    }

private:
    mutable std::vector<double> topic_log_;
};

// Per-document assignment log indexed by stream position. Stored flat so that
// resampling copies a contiguous block instead of allocating per entry;
// event < 0 marks an index with no recorded assignment.
class AssignmentLog {
public:
    Assignment& operator[](int index) {
        if (index >= static_cast<int>(slots_.size())) slots_.resize(index + 1);
        return slots_[index];
    }
    const Assignment* get(int index) const {
        if (index < 0 || index >= static_cast<int>(slots_.size()) || slots_[index].event < 0)
            return nullptr;
        return &slots_[index];
    }
    const Assignment& at(int index) const;
    std::size_t count(int index) const { return get(index) ? 1 : 0; }
    std::size_t size() const {  // number of recorded assignments
        std::size_t n = 0;
        for (const auto& a : slots_) n += a.event >= 0;
        return n;
    }
    int capacity() const { return static_cast<int>(slots_.size()); }

private:
    std::vector<Assignment> slots_;
};

struct Particle {
    // Clusters are shared between resampled particle copies and cloned only
    // when a particle is about to mutate one (copy-on-write), so resampling
    // costs pointer copies instead of deep map copies.
    std::vector<std::shared_ptr<ClusterState>> clusters;
    AssignmentLog assignments;  // stream index -> (s, z)
    double log_weight = 0.0;
    int next_cluster_id = 0;

    // Mutable access; clones the cluster first if other particles share it.
    ClusterState& cluster_by_id(int id);
    const ClusterState* find_cluster(int id) const;
};

struct FilterState {
    std::vector<Particle> particles;
    int epoch = 0;
    long docs_processed = 0;
    std::uint64_t rng_seed = 0;
    int vocab_size = 0;
    Hyperparams params;
};

// Configured solution's point estimate from the cluster's live counts at the
// epoch; falls back to the rolled-forward prior (or uniform) when the cluster
// has no documents there. Unsmoothed.
std::vector<double> raw_topic_estimate(const ClusterState& c, int epoch, const Hyperparams& h,
                                       int vocab_size);
std::vector<double> raw_region_estimate(const ClusterState& c, int epoch, const Hyperparams& h);

// Lazily (re)computes the cluster's estimate cache for the given epoch.
// Clusters with no documents at the epoch fall back to their rolled-forward
// prior, or to the uniform distribution if they have none.
const EstimateCache& estimates(const ClusterState& c, int epoch,
                               const Hyperparams& h, int vocab_size);

// Draws the cluster index from the prior-times-emissions categorical given the current
// region index; creates (and returns the id of) a fresh cluster when the
// new-cluster term wins. The document must be unregistered.
int sample_s(Particle& p, const Document& doc, int z, const Hyperparams& h, int vocab_size,
             Rng& rng);

// Draws the region index given the cluster assignment.
int sample_z(Particle& p, const Document& doc, int cluster_id, const RegionSet& regions,
             const Hyperparams& h, int vocab_size, Rng& rng);

// max_iter alternations of (unregister, sample_s, sample_z, register);
// records the final assignment under doc.index.
void gibbs_sweep(Particle& p, const Document& doc, const RegionSet& regions,
                 const Hyperparams& h, int vocab_size, Rng& rng);

// Adds the document's likelihood under its recorded assignment to the
// particle's log weight, using post-assignment estimates.
void update_weight(Particle& p, const Document& doc, const RegionSet& regions,
                   const Hyperparams& h, int vocab_size);

// 1 / sum_f w_f^2 over normalized linear weights.
double ess(std::span<const Particle> particles);

// Systematic resampling; offspring counts differ from F*w_f by less than 1.
// All weights reset to 1/F.
void resample(FilterState& state, Rng& rng);

struct RunOptions {
    int threads = 1;
    // Called after each document is absorbed (weights normalized, resampling
    // applied). Serial.
    std::function<void(const FilterState&, const Document&, bool resampled)> observer;
    // Called at each epoch boundary with the finished epoch still current,
    // before priors roll forward and dead clusters are pruned.
    std::function<void(const FilterState&)> on_epoch_boundary;
};

// Algorithm main loop over an epoch-sorted document stream. Deterministic
// for a fixed (documents, h, seed) regardless of thread count.
FilterState run(std::span<const Document> documents, const RegionSet& regions,
                const Hyperparams& h, std::uint64_t seed, const RunOptions& options = {});

// Verifies that cluster counts are exactly the aggregation of the particle's
// assignments over the given documents. Throws std::logic_error on mismatch.
void check_count_consistency(const Particle& p, std::span<const Document> documents);

}  // namespace esed
