#pragma once

#include <span>
#include <vector>

#include "esed/core.hpp"
#include "esed/smc.hpp"

namespace esed {

// Negative mean per-token held-out log-likelihood. Each test document is
// assigned to its MAP cluster in the maximum-weight particle; no
// exponentiation (exp of it is reported separately by the CLI).
double perplexity(std::span<const Document> test_docs, const FilterState& state,
                  const RegionSet& regions, const Hyperparams& h);

// Mean squared Euclidean error (in squared degrees) of the predicted
// location. The MAP cluster is chosen from text only; the prediction is the
// cluster's region-weight mixture of region means.
double location_mse(std::span<const Document> test_docs, const FilterState& state,
                    const RegionSet& regions, const Hyperparams& h);

struct RecoveryScores {
    double nmi = 0.0;  // in [0, 1]
    double ari = 0.0;  // in [-1, 1]
};

RecoveryScores recovery_scores(std::span<const int> inferred, std::span<const int> truth);

// Relabels a label sequence by order of first appearance, so partitions from
// different particles (or the oracle) become comparable.
std::vector<int> canonical_labels(std::span<const int> labels);

// The assignment sequence of the maximum-weight particle, in document order.
std::vector<Assignment> map_particle_assignments(const FilterState& state,
                                                 std::span<const Document> documents);

struct EnumerationResult {
    struct Config {
        std::vector<Assignment> assignments;  // canonical cluster labels
        double prob = 0.0;
    };
    std::vector<Config> configs;
    std::vector<std::vector<double>> cluster_marginals;  // [doc][canonical label]
    std::vector<std::vector<double>> region_marginals;   // [doc][region]
};

// Exhaustive enumeration of the sequential target the particle filter
// samples: for every joint (s, z) configuration, the product over documents
// of the per-document conditional (word likelihood x region weight x RCRP
// prior) and the weight-update likelihood, built from the same point
// estimates the filter uses. Throws when the configuration count would
// exceed 1e6.
EnumerationResult enumerate_posterior(std::span<const Document> documents,
                                      const RegionSet& regions, const Hyperparams& h,
                                      int vocab_size);

}  // namespace esed
