#include "esed/core.hpp"

#include <algorithm>
#include <cmath>

#include "esed/rcrp.hpp"

namespace esed {

Solution solution_from_string(const std::string& s) {
    if (s == "S1" || s == "s1" || s == "1") return Solution::S1;
    if (s == "S2" || s == "s2" || s == "2") return Solution::S2;
    if (s == "S3" || s == "s3" || s == "3") return Solution::S3;
    throw std::invalid_argument("unknown solution: " + s);
}

std::string to_string(Solution s) {
    switch (s) {
        case Solution::S1: return "S1";
        case Solution::S2: return "S2";
        default: return "S3";
    }
}

void Hyperparams::validate() const {
    if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be > 0");
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
    if (delta < 0) throw std::invalid_argument("delta must be >= 0");
    if (!(rho0 > 0.0)) throw std::invalid_argument("rho0 must be > 0");
    if (!(tau0 > 0.0)) throw std::invalid_argument("tau0 must be > 0");
    if (num_particles < 1) throw std::invalid_argument("num_particles must be >= 1");
    if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
    if (!(ess_threshold >= 1.0 && ess_threshold <= num_particles))
        throw std::invalid_argument("ess_threshold must lie in [1, num_particles]");
    if (num_regions < 1) throw std::invalid_argument("num_regions must be >= 1");
}

void Document::validate(int vocab_size) const {
    if (epoch < 0) throw std::invalid_argument("document epoch must be >= 0");
    if (index < 0) throw std::invalid_argument("document index must be >= 0");
    if (token_counts.empty()) throw std::invalid_argument("document has no tokens");
    for (const auto& [v, c] : token_counts) {
        if (v < 0 || v >= vocab_size) throw std::invalid_argument("token id out of range");
        if (c <= 0) throw std::invalid_argument("token count must be positive");
    }
    if (lat < -90.0 || lat > 90.0) throw std::invalid_argument("latitude out of range");
    if (lon < -180.0 || lon > 180.0) throw std::invalid_argument("longitude out of range");
}

void Region::validate() const {
    if (!(det() > 0.0)) throw std::invalid_argument("region covariance not positive-definite");
    if (!(cov[0] > 0.0) || !(cov[2] > 0.0))
        throw std::invalid_argument("region covariance not positive-definite");
}

void RegionSet::validate() const {
    if (regions.empty()) throw std::invalid_argument("region set is empty");
    for (const auto& r : regions) r.validate();
}

int ClusterState::docs_at(int epoch) const {
    auto it = doc_counts.find(epoch);
    return it == doc_counts.end() ? 0 : it->second;
}

int ClusterState::tokens_at(int epoch) const {
    auto it = token_totals.find(epoch);
    return it == token_totals.end() ? 0 : it->second;
}

void ClusterState::register_doc(const Document& doc, int region) {
    doc_counts[doc.epoch] += 1;
    auto& wc = word_counts[doc.epoch];
    int n = 0;
    for (const auto& [v, c] : doc.token_counts) {
        wc[v] += c;
        word_hist[v] += c;
        n += c;
    }
    token_totals[doc.epoch] += n;
    region_counts[doc.epoch][region] += 1;
    region_hist[region] += 1;
    docs_total += 1;
    tokens_total += n;
    ++version;
}

void ClusterState::unregister_doc(const Document& doc, int region) {
    auto de = doc_counts.find(doc.epoch);
    if (de == doc_counts.end() || de->second <= 0)
        throw std::logic_error("unregister: document not present in cluster");
    auto drop = [](auto& m, auto it) {
        if (it->second == 0) m.erase(it);
    };
    de->second -= 1;
    drop(doc_counts, de);

    auto& wc = word_counts[doc.epoch];
    int n = 0;
    for (const auto& [v, c] : doc.token_counts) {
        auto it = wc.find(v);
        if (it == wc.end() || it->second < c)
            throw std::logic_error("unregister: word counts would go negative");
        it->second -= c;
        drop(wc, it);
        auto ht = word_hist.find(v);
        ht->second -= c;
        drop(word_hist, ht);
        n += c;
    }
    if (wc.empty()) word_counts.erase(doc.epoch);

    auto tt = token_totals.find(doc.epoch);
    tt->second -= n;
    drop(token_totals, tt);

    auto& rc = region_counts[doc.epoch];
    auto rit = rc.find(region);
    if (rit == rc.end() || rit->second <= 0)
        throw std::logic_error("unregister: region count would go negative");
    rit->second -= 1;
    drop(rc, rit);
    if (rc.empty()) region_counts.erase(doc.epoch);

    auto rh = region_hist.find(region);
    rh->second -= 1;
    drop(region_hist, rh);

    docs_total -= 1;
    tokens_total -= n;
    ++version;
}

void prune_dead(std::vector<ClusterState>& clusters, int t, const Hyperparams& h) {
    std::erase_if(clusters, [&](const ClusterState& c) { return decayed_mass(c, t, h) == 0.0; });
}

void prune_dead(std::vector<std::shared_ptr<ClusterState>>& clusters, int t,
                const Hyperparams& h) {
    std::erase_if(clusters, [&](const auto& c) { return decayed_mass(*c, t, h) == 0.0; });
}

}  // namespace esed
