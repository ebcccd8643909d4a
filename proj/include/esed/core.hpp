#pragma once

#include <array>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "esed/numeric.hpp"

namespace esed {

enum class Solution { S1, S2, S3 };

Solution solution_from_string(const std::string& s);
std::string to_string(Solution s);

struct Hyperparams {
    double gamma = 1.0;        // RCRP dispersion
    double alpha = 1.0;        // temporal decay factor
    int delta = 1;             // temporal window width, in epochs
    double rho0 = 0.1;         // spatial transition scale
    double tau0 = 0.1;         // topic transition scale
    int num_particles = 8;     // F
    int max_iter = 3;          // Gibbs sweeps per document
    double ess_threshold = 4;  // resample when ESS drops below this
    int num_regions = 16;      // M
    Solution solution = Solution::S3;

    // Throws std::invalid_argument naming the offending field.
    void validate() const;
};

struct Document {
    int epoch = 0;
    int index = 0;
    std::map<int, int> token_counts;  // token id -> positive count
    double lat = 0.0;
    double lon = 0.0;

    int total_tokens() const {
        int n = 0;
        for (const auto& [v, c] : token_counts) n += c;
        return n;
    }
    void validate(int vocab_size) const;
};

struct Region {
    std::array<double, 2> mean{0.0, 0.0};
    // Symmetric 2x2 covariance: [a b; b c].
    std::array<double, 3> cov{1.0, 0.0, 1.0};

    double det() const { return cov[0] * cov[2] - cov[1] * cov[1]; }
    void validate() const;
};

struct RegionSet {
    std::vector<Region> regions;
    int size() const { return static_cast<int>(regions.size()); }
    void validate() const;
};

struct Assignment {
    int event = -1;   // cluster label s
    int region = -1;  // region id z
};

// Sufficient statistics for one live cluster, stored per epoch. Counts are
// kept per-epoch because the RCRP prior and Solution 2 need different
// aggregations; aggregation happens at read time.
struct ClusterState {
    int id = -1;
    int birth_epoch = 0;

    std::map<int, int> doc_counts;                              // epoch -> m
    std::map<int, std::map<int, int>> word_counts;              // epoch -> token -> n
    std::map<int, std::map<int, int>> region_counts;            // epoch -> region -> n
    std::map<int, int> token_totals;                            // epoch -> sum of word counts

    // Running all-epoch aggregates (Solution 2 reads these).
    std::map<int, int> word_hist;
    std::map<int, int> region_hist;
    int docs_total = 0;
    int tokens_total = 0;

    // Previous epoch's point estimates, already in probability space.
    std::vector<double> prior_topic;
    std::vector<double> prior_region;

    // Bumped on every count mutation; estimate caches key off it.
    long version = 0;

    // Memoized past-epoch portion (d >= 1 terms) of the decayed mass for one
    // (epoch, alpha, delta). Derived data: past counts cannot change while the
    // stream is inside that epoch, so it is computed once per cluster and
    // epoch for fixed hyperparameters. Not serialized.
    mutable int mass_memo_epoch = std::numeric_limits<int>::min();
    mutable int mass_memo_delta = -1;
    mutable double mass_memo_alpha = 0.0;
    mutable double mass_memo_past = 0.0;

    // Lazily built point estimates for (version, epoch); derived data, not
    // serialized. Stale entries are replaced rather than mutated, so copies
    // of a cluster (particle resampling) share one immutable cache.
    mutable std::shared_ptr<const struct EstimateCache> estimate_cache;

    // Copies carry the counts but start with empty derived data: a cluster is
    // only copied right before being mutated (copy-on-write between particles,
    // enumeration branching), which would invalidate the memo and cache anyway.
    // Skipping them also keeps the copy free of plain reads of fields that
    // other threads update through atomics.
    ClusterState() = default;
    ClusterState(const ClusterState& o)
        : id(o.id),
          birth_epoch(o.birth_epoch),
          doc_counts(o.doc_counts),
          word_counts(o.word_counts),
          region_counts(o.region_counts),
          token_totals(o.token_totals),
          word_hist(o.word_hist),
          region_hist(o.region_hist),
          docs_total(o.docs_total),
          tokens_total(o.tokens_total),
          prior_topic(o.prior_topic),
          prior_region(o.prior_region),
          version(o.version) {}
    ClusterState& operator=(const ClusterState& o) {
        if (this != &o) *this = ClusterState(o);
        return *this;
    }
    ClusterState(ClusterState&&) = default;
    ClusterState& operator=(ClusterState&&) = default;

    bool has_prior() const { return !prior_topic.empty(); }
    int docs_at(int epoch) const;
    int tokens_at(int epoch) const;

    void register_doc(const Document& doc, int region);
    void unregister_doc(const Document& doc, int region);
};

// Removes clusters whose decayed mass at epoch t is exactly zero, i.e. with
// no documents in epochs t-delta..t. Pruned ids are never reused.
void prune_dead(std::vector<ClusterState>& clusters, int t, const Hyperparams& h);
void prune_dead(std::vector<std::shared_ptr<ClusterState>>& clusters, int t, const Hyperparams& h);

}  // namespace esed
