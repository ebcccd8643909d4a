#include "esed/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "esed/emissions.hpp"
#include "esed/laplace.hpp"
#include "esed/numeric.hpp"
#include "esed/rcrp.hpp"

namespace esed {

namespace {

const Particle& max_weight_particle(const FilterState& state) {
    if (state.particles.empty()) throw std::invalid_argument("empty filter state");
    const Particle* best = &state.particles[0];
    for (const auto& p : state.particles)
        if (p.log_weight > best->log_weight) best = &p;
    return *best;
}

// MAP cluster of a test document in the given particle; returns the index
// into p.clusters, or -1 for the new-cluster option.
int map_cluster(const Particle& p, const Document& doc, const FilterState& state,
                const RegionSet& regions, const Hyperparams& h, bool with_location) {
    const int v = state.vocab_size;
    double best = -std::numeric_limits<double>::infinity();
    int best_k = -1;

    std::vector<double> loc(regions.size());
    for (int z = 0; z < regions.size(); ++z)
        loc[z] = location_loglik(doc.lat, doc.lon, regions.regions[z]);

    for (std::size_t j = 0; j < p.clusters.size(); ++j) {
        double mass = decayed_mass(*p.clusters[j], state.epoch, h);
        if (mass <= 0.0) continue;
        const EstimateCache& est = estimates(*p.clusters[j], state.epoch, h, v);
        double score = std::log(mass);
        for (const auto& [w, c] : doc.token_counts) score += c * est.topic_logp(w);
        if (with_location) {
            std::vector<double> terms(regions.size());
            for (int z = 0; z < regions.size(); ++z) terms[z] = est.region_log[z] + loc[z];
            score += log_sum_exp(terms);
        }
        if (score > best) {
            best = score;
            best_k = static_cast<int>(j);
        }
    }
    double fresh = std::log(h.gamma) - doc.total_tokens() * std::log(double(v));
    if (with_location) {
        std::vector<double> terms(regions.size());
        for (int z = 0; z < regions.size(); ++z) terms[z] = -std::log(double(regions.size())) + loc[z];
        fresh += log_sum_exp(terms);
    }
    if (fresh > best) best_k = -1;
    return best_k;
}

}  // namespace

double perplexity(std::span<const Document> test_docs, const FilterState& state,
                  const RegionSet& regions, const Hyperparams& h) {
    if (test_docs.empty()) throw std::invalid_argument("perplexity: empty test set");
    const Particle& p = max_weight_particle(state);
    const int v = state.vocab_size;
    double total_ll = 0.0;
    long total_tokens = 0;
    const double uniform_log = -std::log(double(v));
    for (const auto& doc : test_docs) {
        int k = map_cluster(p, doc, state, regions, h, /*with_location=*/true);
        for (const auto& [w, c] : doc.token_counts) {
            if (w < 0 || w >= v) throw std::out_of_range("perplexity: token id out of range");
            if (k < 0) {
                total_ll += c * uniform_log;
            } else {
                const EstimateCache& est = estimates(*p.clusters[k], state.epoch, h, v);
                total_ll += c * est.topic_logp(w);
            }
            total_tokens += c;
        }
    }
    return -total_ll / double(total_tokens);
}

double location_mse(std::span<const Document> test_docs, const FilterState& state,
                    const RegionSet& regions, const Hyperparams& h) {
    if (test_docs.empty()) throw std::invalid_argument("location_mse: empty test set");
    const Particle& p = max_weight_particle(state);
    const int v = state.vocab_size;
    double total = 0.0;
    for (const auto& doc : test_docs) {
        int k = map_cluster(p, doc, state, regions, h, /*with_location=*/false);
        double plat = 0.0, plon = 0.0;
        if (k < 0) {
            for (const auto& r : regions.regions) {
                plat += r.mean[0] / regions.size();
                plon += r.mean[1] / regions.size();
            }
        } else {
            const EstimateCache& est = estimates(*p.clusters[k], state.epoch, h, v);
            for (int z = 0; z < regions.size(); ++z) {
                plat += est.region[z] * regions.regions[z].mean[0];
                plon += est.region[z] * regions.regions[z].mean[1];
            }
        }
        double dx = plat - doc.lat, dy = plon - doc.lon;
        total += dx * dx + dy * dy;
    }
    return total / double(test_docs.size());
}

std::vector<int> canonical_labels(std::span<const int> labels) {
    std::map<int, int> remap;
    std::vector<int> out;
    out.reserve(labels.size());
    for (int l : labels) {
        auto [it, fresh] = remap.emplace(l, static_cast<int>(remap.size()));
        out.push_back(it->second);
    }
    return out;
}

std::vector<Assignment> map_particle_assignments(const FilterState& state,
                                                 std::span<const Document> documents) {
    const Particle& p = max_weight_particle(state);
    std::vector<Assignment> out;
    out.reserve(documents.size());
    for (const auto& doc : documents) {
        const Assignment* a = p.assignments.get(doc.index);
        if (a == nullptr) throw std::invalid_argument("document has no recorded assignment");
        out.push_back(*a);
    }
    return out;
}

RecoveryScores recovery_scores(std::span<const int> inferred, std::span<const int> truth) {
    if (inferred.size() != truth.size())
        throw std::invalid_argument("recovery_scores: length mismatch");
    const std::size_t n = inferred.size();
    if (n == 0) throw std::invalid_argument("recovery_scores: empty partitions");

    auto canon_a = canonical_labels(inferred);
    auto canon_b = canonical_labels(truth);
    int ka = *std::max_element(canon_a.begin(), canon_a.end()) + 1;
    int kb = *std::max_element(canon_b.begin(), canon_b.end()) + 1;
    std::vector<std::vector<long>> cont(ka, std::vector<long>(kb, 0));
    std::vector<long> a(ka, 0), b(kb, 0);
    for (std::size_t i = 0; i < n; ++i) {
        ++cont[canon_a[i]][canon_b[i]];
        ++a[canon_a[i]];
        ++b[canon_b[i]];
    }

    double mi = 0.0, ha = 0.0, hb = 0.0;
    const double dn = double(n);
    for (int i = 0; i < ka; ++i)
        if (a[i] > 0) ha -= a[i] / dn * std::log(a[i] / dn);
    for (int j = 0; j < kb; ++j)
        if (b[j] > 0) hb -= b[j] / dn * std::log(b[j] / dn);
    for (int i = 0; i < ka; ++i)
        for (int j = 0; j < kb; ++j)
            if (cont[i][j] > 0)
                mi += cont[i][j] / dn *
                      std::log(dn * cont[i][j] / (double(a[i]) * double(b[j])));

    RecoveryScores s;
    if (ha + hb <= 0.0)
        s.nmi = 1.0;  // both partitions are a single block
    else
        s.nmi = std::clamp(2.0 * mi / (ha + hb), 0.0, 1.0);

    auto choose2 = [](long x) { return 0.5 * double(x) * double(x - 1); };
    double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (int i = 0; i < ka; ++i)
        for (int j = 0; j < kb; ++j) sum_ij += choose2(cont[i][j]);
    for (int i = 0; i < ka; ++i) sum_a += choose2(a[i]);
    for (int j = 0; j < kb; ++j) sum_b += choose2(b[j]);
    double total_pairs = choose2(static_cast<long>(n));
    double expected = total_pairs > 0.0 ? sum_a * sum_b / total_pairs : 0.0;
    double max_index = 0.5 * (sum_a + sum_b);
    double denom = max_index - expected;
    s.ari = (std::abs(denom) < 1e-300) ? 1.0 : (sum_ij - expected) / denom;
    return s;
}

namespace {

// Oracle-side estimate computation, built directly from the Laplace
// solutions so it stays independent of the filter's caching machinery.
std::vector<double> oracle_raw_estimate(const ClusterState& c, int epoch, const Hyperparams& h,
                                        int dim, bool topical) {
    const int total = topical ? c.tokens_at(epoch) : c.docs_at(epoch);
    const std::vector<double>& prior = topical ? c.prior_topic : c.prior_region;
    std::vector<double> prior_or_uniform =
        prior.empty() ? std::vector<double>(dim, 1.0 / dim) : prior;
    if (total == 0) return prior_or_uniform;
    CountContext ctx;
    ctx.current_counts.assign(dim, 0.0);
    const auto& counts = topical ? c.word_counts.at(epoch) : c.region_counts.at(epoch);
    for (const auto& [i, cnt] : counts) ctx.current_counts[i] = cnt;
    ctx.total = total;
    if (h.solution == Solution::S2) {
        ctx.historical_counts.assign(dim, 0.0);
        const auto& hist = topical ? c.word_hist : c.region_hist;
        for (const auto& [i, cnt] : hist) ctx.historical_counts[i] = cnt;
    }
    ctx.prior_probs = std::move(prior_or_uniform);
    ctx.scale = topical ? h.tau0 : h.rho0;
    switch (h.solution) {
        case Solution::S1: return solution1(ctx);
        case Solution::S2: return solution2(ctx);
        default: return solution3(ctx);
    }
}

std::vector<double> oracle_estimate(const ClusterState& c, int epoch, const Hyperparams& h,
                                    int dim, bool topical) {
    return smooth_estimate(oracle_raw_estimate(c, epoch, h, dim, topical));
}

struct EnumState {
    std::vector<ClusterState> clusters;
    int next_id = 0;
    int epoch = 0;
};

struct EnumContext {
    std::span<const Document> documents;
    const RegionSet* regions;
    const Hyperparams* h;
    int vocab_size;
    std::vector<Assignment> current;
    std::vector<EnumerationResult::Config> configs;
};

void enumerate_rec(EnumContext& ctx, EnumState state, std::size_t d, double logp) {
    if (d == ctx.documents.size()) {
        ctx.configs.push_back({ctx.current, logp});
        return;
    }
    const Document& doc = ctx.documents[d];
    const Hyperparams& h = *ctx.h;
    const RegionSet& regions = *ctx.regions;
    const int m = regions.size();
    const int v = ctx.vocab_size;

    if (doc.epoch > state.epoch) {
        for (auto& c : state.clusters) {
            if (c.docs_at(state.epoch) == 0) continue;
            // roll the raw (unsmoothed) estimates forward as priors
            c.prior_topic = oracle_raw_estimate(c, state.epoch, h, v, true);
            c.prior_region = oracle_raw_estimate(c, state.epoch, h, m, false);
        }
        prune_dead(state.clusters, doc.epoch, h);
        state.epoch = doc.epoch;
    }

    std::vector<double> loc(m);
    for (int z = 0; z < m; ++z)
        loc[z] = location_loglik(doc.lat, doc.lon, regions.regions[z]);

    const int k_live = static_cast<int>(state.clusters.size());
    // Joint conditional over (cluster, region), the stationary distribution
    // of the filter's per-document Gibbs sweep.
    std::vector<double> logits((k_live + 1) * m);
    for (int j = 0; j < k_live; ++j) {
        const ClusterState& c = state.clusters[j];
        double mass = decayed_mass(c, doc.epoch, h);
        auto topic = oracle_estimate(c, doc.epoch, h, v, true);
        auto region = oracle_estimate(c, doc.epoch, h, m, false);
        double word_ll = word_loglik(doc.token_counts, topic);
        for (int z = 0; z < m; ++z)
            logits[j * m + z] = (mass > 0.0 ? std::log(mass) : -1e300) + word_ll +
                                std::log(region[z]) + loc[z];
    }
    double fresh_word = -doc.total_tokens() * std::log(double(v));
    for (int z = 0; z < m; ++z)
        logits[k_live * m + z] = std::log(h.gamma) + fresh_word - std::log(double(m)) + loc[z];
    double norm = log_sum_exp(logits);

    for (int j = 0; j <= k_live; ++j) {
        for (int z = 0; z < m; ++z) {
            EnumState next = state;
            int label;
            if (j == k_live) {
                ClusterState fresh;
                fresh.id = next.next_id++;
                fresh.birth_epoch = doc.epoch;
                next.clusters.push_back(std::move(fresh));
                label = next.clusters.back().id;
            } else {
                label = next.clusters[j].id;
            }
            ClusterState& c = next.clusters[j == k_live ? k_live : j];
            c.register_doc(doc, z);
            // weight-update likelihood at post-assignment estimates
            auto topic_post = oracle_estimate(c, doc.epoch, h, v, true);
            double log_weight_term = word_loglik(doc.token_counts, topic_post) + loc[z];
            ctx.current.push_back(Assignment{label, z});
            enumerate_rec(ctx, std::move(next), d + 1,
                          logp + logits[j * m + z] - norm + log_weight_term);
            ctx.current.pop_back();
        }
    }
}

}  // namespace

EnumerationResult enumerate_posterior(std::span<const Document> documents,
                                      const RegionSet& regions, const Hyperparams& h,
                                      int vocab_size) {
    if (documents.empty()) throw std::invalid_argument("enumerate_posterior: empty corpus");
    double configs_bound = 1.0;
    for (std::size_t d = 0; d < documents.size(); ++d)
        configs_bound *= double((d + 2) * regions.size());
    if (configs_bound > 1e6)
        throw std::invalid_argument("enumerate_posterior: state space too large");

    EnumContext ctx;
    ctx.documents = documents;
    ctx.regions = &regions;
    ctx.h = &h;
    ctx.vocab_size = vocab_size;
    EnumState init;
    init.epoch = documents[0].epoch;
    enumerate_rec(ctx, std::move(init), 0, 0.0);

    EnumerationResult result;
    std::vector<double> logps(ctx.configs.size());
    for (std::size_t i = 0; i < ctx.configs.size(); ++i) logps[i] = ctx.configs[i].prob;
    double norm = log_sum_exp(logps);

    const std::size_t n = documents.size();
    int max_label = 0;
    for (auto& cfg : ctx.configs)
        for (auto& a : cfg.assignments) max_label = std::max(max_label, a.event + 1);
    result.cluster_marginals.assign(n, std::vector<double>(max_label, 0.0));
    result.region_marginals.assign(n, std::vector<double>(regions.size(), 0.0));
    for (std::size_t i = 0; i < ctx.configs.size(); ++i) {
        double p = std::exp(logps[i] - norm);
        ctx.configs[i].prob = p;
        for (std::size_t d = 0; d < n; ++d) {
            result.cluster_marginals[d][ctx.configs[i].assignments[d].event] += p;
            result.region_marginals[d][ctx.configs[i].assignments[d].region] += p;
        }
    }
    result.configs = std::move(ctx.configs);
    return result;
}

}  // namespace esed
