#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "esed/core.hpp"

namespace esed {

struct Vocabulary {
    std::unordered_map<std::string, int> token_to_id;
    std::vector<std::string> id_to_token;
    int min_frequency = 1;

    int size() const { return static_cast<int>(id_to_token.size()); }
    int lookup(const std::string& token) const;  // -1 if absent
};

struct Corpus {
    std::vector<Document> documents;  // sorted by epoch, stable within
    Vocabulary vocab;
    long dropped_empty = 0;  // documents left tokenless by frequency filtering
};

struct LoadOptions {
    int min_frequency = 5;
    double epoch_width_seconds = 86400.0;
    // When set, tokens are mapped through this vocabulary instead of building
    // a new one (no frequency filtering).
    const Vocabulary* fixed_vocab = nullptr;
};

// Reads UTF-8 lines `unix_timestamp<TAB>lat<TAB>lon<TAB>token token ...`,
// lowercases and frequency-filters tokens, and bins documents into
// fixed-width epochs counted from the corpus minimum timestamp. Malformed
// lines are reported with their line number.
Corpus load_corpus(const std::string& path, const LoadOptions& options = {});
Corpus load_corpus(std::istream& in, const LoadOptions& options = {});

// Re-serializes documents in the corpus line format. Timestamps are
// reconstructed as epoch * width, so load(write(load(x))) == load(x).
void write_corpus(std::ostream& out, const std::vector<Document>& documents,
                  const Vocabulary& vocab, double epoch_width_seconds);

// Uniform random split, deterministic given seed; both halves keep the
// original document order.
std::pair<std::vector<Document>, std::vector<Document>> split(
    const std::vector<Document>& documents, double train_fraction, std::uint64_t seed);

// k-means (k-means++ init, 100 iterations or 1e-8 center movement) on the
// training locations, with per-cluster sample covariance regularized by
// +1e-4 I.
RegionSet fit_regions(const std::vector<std::pair<double, double>>& locations, int m,
                      std::uint64_t seed);
RegionSet fit_regions(const std::vector<Document>& documents, int m, std::uint64_t seed);

struct SynthConfig {
    int initial_clusters = 5;  // K0, seeded with the first documents of epoch 0
    int epochs = 10;           // T
    int docs_per_epoch = 200;
    int vocab_size = 50;
    int num_regions = 4;
    int tokens_per_doc = 20;
    Hyperparams h;  // gamma/alpha/delta drive the RCRP, rho0/tau0 the walks
};

struct SyntheticTruth {
    std::vector<Assignment> assignments;          // per document, stream order
    // Natural-parameter trajectories per cluster, epoch -> vector.
    std::vector<std::map<int, std::vector<double>>> topic_traj;
    std::vector<std::map<int, std::vector<double>>> region_traj;
    RegionSet regions;
};

struct SyntheticCorpus {
    std::vector<Document> documents;
    SyntheticTruth truth;
    int vocab_size = 0;
};

// Simulates the full generative story: RCRP cluster draws, Gaussian
// random-walk parameter evolution, logistic-Multinomial word and region
// emissions, Gaussian locations. Deterministic given seed.
SyntheticCorpus generate_synthetic(const SynthConfig& config, std::uint64_t seed);

// Synthetic vocabulary token for id i ("t00000" style, so load order is
// stable and ids survive a round-trip).
std::string synthetic_token(int id);
Vocabulary synthetic_vocabulary(int vocab_size);

void write_truth(std::ostream& out, const SyntheticCorpus& corpus);
SyntheticTruth load_truth(std::istream& in);

}  // namespace esed
