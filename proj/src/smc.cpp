#include "esed/smc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "esed/emissions.hpp"
#include "esed/laplace.hpp"
#include "esed/rcrp.hpp"

namespace esed {

namespace {

std::vector<double> uniform_simplex(int n) {
    return std::vector<double>(n, 1.0 / n);
}

std::vector<double> dense_counts(const std::map<int, int>& sparse, int dim) {
    std::vector<double> out(dim, 0.0);
    for (const auto& [i, c] : sparse) out[i] = c;
    return out;
}

std::vector<double> apply_solution(const CountContext& ctx, Solution s) {
    switch (s) {
        case Solution::S1: return solution1(ctx);
        case Solution::S2: return solution2(ctx);
        default: return solution3(ctx);
    }
}

}  // namespace

std::vector<double> raw_topic_estimate(const ClusterState& c, int epoch, const Hyperparams& h,
                                       int vocab_size) {
    const int total = c.tokens_at(epoch);
    if (total == 0) return c.has_prior() ? c.prior_topic : uniform_simplex(vocab_size);
    CountContext ctx;
    ctx.current_counts = dense_counts(c.word_counts.at(epoch), vocab_size);
    ctx.total = total;
    if (h.solution == Solution::S2) ctx.historical_counts = dense_counts(c.word_hist, vocab_size);
    ctx.prior_probs = c.has_prior() ? c.prior_topic : uniform_simplex(vocab_size);
    ctx.scale = h.tau0;
    return apply_solution(ctx, h.solution);
}

std::vector<double> raw_region_estimate(const ClusterState& c, int epoch, const Hyperparams& h) {
    const int total = c.docs_at(epoch);
    if (total == 0)
        return !c.prior_region.empty() ? c.prior_region : uniform_simplex(h.num_regions);
    CountContext ctx;
    auto it = c.region_counts.find(epoch);
    ctx.current_counts = dense_counts(it->second, h.num_regions);
    ctx.total = total;
    if (h.solution == Solution::S2)
        ctx.historical_counts = dense_counts(c.region_hist, h.num_regions);
    ctx.prior_probs = !c.prior_region.empty() ? c.prior_region : uniform_simplex(h.num_regions);
    ctx.scale = h.rho0;
    return apply_solution(ctx, h.solution);
}

const Assignment& AssignmentLog::at(int index) const {
    const Assignment* a = get(index);
    if (a == nullptr) throw std::out_of_range("AssignmentLog::at: no assignment at index");
    return *a;
}

ClusterState& Particle::cluster_by_id(int id) {
    for (auto& c : clusters)
        if (c->id == id) {
            // New shared references only appear in the serial resampling step,
            // so a use count of 1 here cannot be invalidated concurrently.
            if (c.use_count() > 1) c = std::make_shared<ClusterState>(*c);
            return *c;
        }
    throw std::logic_error("cluster_by_id: no such cluster");
}

const ClusterState* Particle::find_cluster(int id) const {
    for (const auto& c : clusters)
        if (c->id == id) return c.get();
    return nullptr;
}

const EstimateCache& estimates(const ClusterState& c, int epoch,
                               const Hyperparams& h, int vocab_size) {
    // The slot is accessed atomically: a cluster shared between particles can
    // be read from several threads, and concurrent rebuilds produce identical
    // caches from the same counts. Compare-exchange keeps the first installed
    // cache so references already handed out stay valid.
    std::shared_ptr<const EstimateCache> cur = std::atomic_load(&c.estimate_cache);
    if (cur && cur->version == c.version && cur->epoch == epoch) return *cur;
    std::shared_ptr<EstimateCache> cache = std::make_shared<EstimateCache>();
    cache->topic = raw_topic_estimate(c, epoch, h, vocab_size);
    double z = 0.0;
    for (double& v : cache->topic) {
        if (v < kEstimateFloor) v = kEstimateFloor;
        z += v;
    }
    for (double& v : cache->topic) v /= z;
    cache->reset_logs();
    cache->region = smooth_estimate(raw_region_estimate(c, epoch, h));
    cache->region_log.resize(cache->region.size());
    for (std::size_t i = 0; i < cache->region.size(); ++i)
        cache->region_log[i] = std::log(cache->region[i]);
    cache->version = c.version;
    cache->epoch = epoch;
    std::shared_ptr<const EstimateCache> installed = std::move(cache);
    if (std::atomic_compare_exchange_strong(&c.estimate_cache, &cur, installed)) return *installed;
    return *cur;  // a racing thread installed the identical cache first
}

int sample_s(Particle& p, const Document& doc, int z, const Hyperparams& h, int vocab_size,
             Rng& rng) {
    const int k_live = static_cast<int>(p.clusters.size());
    std::vector<double> logits(k_live + 1);
    for (int j = 0; j < k_live; ++j) {
        const ClusterState& c = *p.clusters[j];
        double mass = decayed_mass(c, doc.epoch, h);
        if (mass <= 0.0) {
            logits[j] = -std::numeric_limits<double>::infinity();
            continue;
        }
        const EstimateCache& est = estimates(c, doc.epoch, h, vocab_size);
        double ll = std::log(mass) + est.region_log[z];
        for (const auto& [v, cnt] : doc.token_counts) ll += cnt * est.topic_logp(v);
        logits[j] = ll;
    }
    // New-cluster term: logistic transform of the zero prior mean, i.e.
    // uniform 1/V per word and 1/M for the region.
    logits[k_live] = std::log(h.gamma) - doc.total_tokens() * std::log(double(vocab_size)) -
                     std::log(double(h.num_regions));
    int pick = rng.next_categorical_logits(logits);
    if (pick < k_live) return p.clusters[pick]->id;
    auto fresh = std::make_shared<ClusterState>();
    fresh->id = p.next_cluster_id++;
    fresh->birth_epoch = doc.epoch;
    p.clusters.push_back(std::move(fresh));
    return p.clusters.back()->id;
}

int sample_z(Particle& p, const Document& doc, int cluster_id, const RegionSet& regions,
             const Hyperparams& h, int vocab_size, Rng& rng) {
    const ClusterState& c = p.cluster_by_id(cluster_id);
    const EstimateCache& est = estimates(c, doc.epoch, h, vocab_size);
    std::vector<double> logits(regions.size());
    for (int z = 0; z < regions.size(); ++z)
        logits[z] = est.region_log[z] + location_loglik(doc.lat, doc.lon, regions.regions[z]);
    return rng.next_categorical_logits(logits);
}

void gibbs_sweep(Particle& p, const Document& doc, const RegionSet& regions,
                 const Hyperparams& h, int vocab_size, Rng& rng) {
    // Initial region index: location-informed draw under a uniform region
    // estimate (the new-cluster emission).
    std::vector<double> loc_logits(regions.size());
    for (int z = 0; z < regions.size(); ++z)
        loc_logits[z] = location_loglik(doc.lat, doc.lon, regions.regions[z]);
    int z = rng.next_categorical_logits(loc_logits);
    int s = -1;

    for (int it = 0; it < h.max_iter; ++it) {
        if (s >= 0) {
            ClusterState& c = p.cluster_by_id(s);
            c.unregister_doc(doc, z);
            if (c.docs_total == 0)
                std::erase_if(p.clusters, [&](const auto& x) { return x->id == s; });
        }
        s = sample_s(p, doc, z, h, vocab_size, rng);
        z = sample_z(p, doc, s, regions, h, vocab_size, rng);
        p.cluster_by_id(s).register_doc(doc, z);
    }
    p.assignments[doc.index] = Assignment{s, z};
}

void update_weight(Particle& p, const Document& doc, const RegionSet& regions,
                   const Hyperparams& h, int vocab_size) {
    const Assignment* found = p.assignments.get(doc.index);
    if (found == nullptr)
        throw std::logic_error("update_weight: document has no recorded assignment");
    const Assignment& a = *found;
    const ClusterState& c = p.cluster_by_id(a.event);
    const EstimateCache& est = estimates(c, doc.epoch, h, vocab_size);
    double ll = location_loglik(doc.lat, doc.lon, regions.regions[a.region]);
    for (const auto& [v, cnt] : doc.token_counts) ll += cnt * est.topic_logp(v);
    p.log_weight += ll;
}

double ess(std::span<const Particle> particles) {
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& p : particles) {
        double w = std::exp(p.log_weight);
        sum += w;
        sum_sq += w * w;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw std::logic_error("ess: weights are not normalized");
    return 1.0 / sum_sq;
}

void resample(FilterState& state, Rng& rng) {
    const int f_count = static_cast<int>(state.particles.size());
    std::vector<double> w(f_count);
    for (int f = 0; f < f_count; ++f) w[f] = std::exp(state.particles[f].log_weight);

    const double u = rng.next_double();
    std::vector<int> copies(f_count, 0);
    double cum = 0.0;
    int j = 0;
    for (int f = 0; f < f_count && j < f_count; ++f) {
        cum += w[f];
        while (j < f_count && (j + u) / f_count < cum) {
            ++copies[f];
            ++j;
        }
    }
    copies[f_count - 1] += f_count - j;  // guard against cumulative rounding at the top end
    std::vector<Particle> next;
    next.reserve(f_count);
    for (int f = 0; f < f_count; ++f) {
        for (int r = 1; r < copies[f]; ++r) next.push_back(state.particles[f]);
        // The last replica can take the original wholesale instead of
        // deep-copying it; surviving particles are the common case.
        if (copies[f] > 0) next.push_back(std::move(state.particles[f]));
    }
    const double lw = -std::log(double(f_count));
    for (auto& p : next) p.log_weight = lw;
    state.particles = std::move(next);
}

namespace {

void normalize_weights(FilterState& state) {
    std::vector<double> lws(state.particles.size());
    for (std::size_t f = 0; f < state.particles.size(); ++f)
        lws[f] = state.particles[f].log_weight;
    double lse = log_sum_exp(lws);
    for (auto& p : state.particles) p.log_weight -= lse;
}

void roll_forward(Particle& p, int finished_epoch, const Hyperparams& h, int vocab_size) {
    for (auto& c : p.clusters) {
        if (c->docs_at(finished_epoch) == 0) continue;  // prior carries over unchanged
        if (c.use_count() > 1) c = std::make_shared<ClusterState>(*c);
        c->prior_topic = raw_topic_estimate(*c, finished_epoch, h, vocab_size);
        c->prior_region = raw_region_estimate(*c, finished_epoch, h);
        ++c->version;
    }
}

constexpr std::uint64_t kStreamGibbs = 0x67696262;
constexpr std::uint64_t kStreamResample = 0x72657361;

}  // namespace

FilterState run(std::span<const Document> documents, const RegionSet& regions,
                const Hyperparams& h, std::uint64_t seed, const RunOptions& options) {
    h.validate();
    regions.validate();
    if (regions.size() != h.num_regions)
        throw std::invalid_argument("run: region set size does not match num_regions");
    if (documents.empty()) throw std::invalid_argument("run: empty corpus");
    for (std::size_t i = 1; i < documents.size(); ++i)
        if (documents[i].epoch < documents[i - 1].epoch)
            throw std::invalid_argument("run: documents are not sorted by epoch");

    FilterState state;
    state.rng_seed = seed;
    state.params = h;
    state.epoch = documents[0].epoch;
    int vmax = 0;
    for (const auto& d : documents)
        for (const auto& [v, c] : d.token_counts) vmax = std::max(vmax, v + 1);
    state.vocab_size = vmax;
    const int f_count = h.num_particles;
    state.particles.resize(f_count);
    for (auto& p : state.particles) p.log_weight = -std::log(double(f_count));

    for (std::size_t i = 0; i < documents.size(); ++i) {
        const Document& doc = documents[i];
        if (doc.epoch > state.epoch) {
            if (options.on_epoch_boundary) options.on_epoch_boundary(state);
            for (auto& p : state.particles) {
                roll_forward(p, state.epoch, h, state.vocab_size);
                prune_dead(p.clusters, doc.epoch, h);
            }
            state.epoch = doc.epoch;
        }

        const long gidx = state.docs_processed;
        auto process = [&](int f) {
            Rng rng(derive_seed(seed ^ kStreamGibbs, static_cast<std::uint64_t>(f), gidx));
            gibbs_sweep(state.particles[f], doc, regions, h, state.vocab_size, rng);
            update_weight(state.particles[f], doc, regions, h, state.vocab_size);
        };
        if (options.threads > 1) {
#ifdef _OPENMP
#pragma omp parallel for num_threads(options.threads) schedule(dynamic)
#endif
            for (int f = 0; f < f_count; ++f) process(f);
        } else {
            for (int f = 0; f < f_count; ++f) process(f);
        }

        normalize_weights(state);
        state.docs_processed += 1;

        bool resampled = false;
        if (ess(state.particles) < h.ess_threshold) {
            Rng rng(derive_seed(seed ^ kStreamResample, 0, gidx));
            resample(state, rng);
            resampled = true;
        }
        if (options.observer) options.observer(state, doc, resampled);
    }
    return state;
}

void check_count_consistency(const Particle& p, std::span<const Document> documents) {
    std::vector<ClusterState> expected;
    auto find = [&](int id) -> ClusterState* {
        for (auto& c : expected)
            if (c.id == id) return &c;
        return nullptr;
    };
    for (const auto& doc : documents) {
        const Assignment* a = p.assignments.get(doc.index);
        if (a == nullptr) continue;
        if (p.find_cluster(a->event) == nullptr) continue;  // cluster was pruned
        ClusterState* c = find(a->event);
        if (c == nullptr) {
            expected.emplace_back();
            expected.back().id = a->event;
            c = &expected.back();
        }
        c->register_doc(doc, a->region);
    }
    for (const auto& c : expected) {
        const ClusterState* actual = p.find_cluster(c.id);
        if (actual == nullptr) throw std::logic_error("consistency: missing cluster");
        if (actual->doc_counts != c.doc_counts || actual->word_counts != c.word_counts ||
            actual->region_counts != c.region_counts || actual->token_totals != c.token_totals ||
            actual->word_hist != c.word_hist || actual->region_hist != c.region_hist)
            throw std::logic_error("consistency: cluster counts do not match assignments");
    }
    for (const auto& cp : p.clusters)
        if (cp->docs_total > 0 && find(cp->id) == nullptr)
            throw std::logic_error("consistency: cluster has counts but no assignments");
}

}  // namespace esed
