#include "esed/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "esed/numeric.hpp"

namespace esed {

using json = nlohmann::ordered_json;

int Vocabulary::lookup(const std::string& token) const {
    auto it = token_to_id.find(token);
    return it == token_to_id.end() ? -1 : it->second;
}

namespace {

struct RawRecord {
    double timestamp;
    double lat, lon;
    std::vector<std::string> tokens;
};

std::vector<RawRecord> parse_lines(std::istream& in) {
    std::vector<RawRecord> records;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string ts_s, lat_s, lon_s, text;
        if (!std::getline(ls, ts_s, '\t') || !std::getline(ls, lat_s, '\t') ||
            !std::getline(ls, lon_s, '\t'))
            throw std::runtime_error("corpus line " + std::to_string(line_no) +
                                     ": expected 4 tab-separated fields");
        std::getline(ls, text);
        RawRecord r;
        try {
            r.timestamp = std::stod(ts_s);
            r.lat = std::stod(lat_s);
            r.lon = std::stod(lon_s);
        } catch (const std::exception&) {
            throw std::runtime_error("corpus line " + std::to_string(line_no) +
                                     ": malformed numeric field");
        }
        if (r.lat < -90.0 || r.lat > 90.0 || r.lon < -180.0 || r.lon > 180.0)
            throw std::runtime_error("corpus line " + std::to_string(line_no) +
                                     ": coordinates out of range");
        std::istringstream ws(text);
        std::string tok;
        while (ws >> tok) {
            for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            r.tokens.push_back(tok);
        }
        records.push_back(std::move(r));
    }
    return records;
}

}  // namespace

Corpus load_corpus(std::istream& in, const LoadOptions& options) {
    auto records = parse_lines(in);
    Corpus out;
    if (records.empty()) return out;

    if (options.fixed_vocab != nullptr) {
        out.vocab = *options.fixed_vocab;
    } else {
        std::unordered_map<std::string, long> freq;
        for (const auto& r : records)
            for (const auto& t : r.tokens) ++freq[t];
        out.vocab.min_frequency = options.min_frequency;
        for (const auto& r : records)
            for (const auto& t : r.tokens) {
                if (freq.at(t) < options.min_frequency) continue;
                if (out.vocab.token_to_id.emplace(t, out.vocab.size()).second)
                    out.vocab.id_to_token.push_back(t);
            }
    }

    double min_ts = records[0].timestamp;
    for (const auto& r : records) min_ts = std::min(min_ts, r.timestamp);

    for (const auto& r : records) {
        Document d;
        d.epoch = static_cast<int>(std::floor((r.timestamp - min_ts) / options.epoch_width_seconds));
        d.lat = r.lat;
        d.lon = r.lon;
        for (const auto& t : r.tokens) {
            int id = out.vocab.lookup(t);
            if (id >= 0) d.token_counts[id] += 1;
        }
        if (d.token_counts.empty()) {
            ++out.dropped_empty;
            continue;
        }
        out.documents.push_back(std::move(d));
    }
    std::stable_sort(out.documents.begin(), out.documents.end(),
                     [](const Document& a, const Document& b) { return a.epoch < b.epoch; });
    for (std::size_t i = 0; i < out.documents.size(); ++i)
        out.documents[i].index = static_cast<int>(i);
    return out;
}

Corpus load_corpus(const std::string& path, const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open corpus file: " + path);
    return load_corpus(in, options);
}

void write_corpus(std::ostream& out, const std::vector<Document>& documents,
                  const Vocabulary& vocab, double epoch_width_seconds) {
    char buf[96];
    for (const auto& d : documents) {
        std::snprintf(buf, sizeof(buf), "%.17g\t%.17g\t%.17g", d.epoch * epoch_width_seconds,
                      d.lat, d.lon);
        out << buf;
        char sep = '\t';
        for (const auto& [v, c] : d.token_counts)
            for (int i = 0; i < c; ++i) {
                out << sep << vocab.id_to_token.at(v);
                sep = ' ';
            }
        out << '\n';
    }
}

std::pair<std::vector<Document>, std::vector<Document>> split(
    const std::vector<Document>& documents, double train_fraction, std::uint64_t seed) {
    if (documents.empty()) throw std::invalid_argument("split: empty corpus");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("split: train_fraction must lie in (0, 1)");
    const std::size_t n = documents.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(derive_seed(seed, 0x73706c69, 0));
    for (std::size_t i = n - 1; i > 0; --i) {
        std::size_t j = rng.next_u64() % (i + 1);
        std::swap(idx[i], idx[j]);
    }
    std::size_t n_train = static_cast<std::size_t>(std::llround(train_fraction * double(n)));
    n_train = std::min(std::max<std::size_t>(n_train, 1), n - 1);
    std::vector<bool> in_train(n, false);
    for (std::size_t i = 0; i < n_train; ++i) in_train[idx[i]] = true;
    std::vector<Document> train, test;
    for (std::size_t i = 0; i < n; ++i)
        (in_train[i] ? train : test).push_back(documents[i]);
    return {std::move(train), std::move(test)};
}

RegionSet fit_regions(const std::vector<std::pair<double, double>>& locations, int m,
                      std::uint64_t seed) {
    if (m < 1) throw std::invalid_argument("fit_regions: m must be >= 1");
    std::vector<std::pair<double, double>> distinct = locations;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (static_cast<int>(distinct.size()) < m)
        throw std::invalid_argument("fit_regions: fewer distinct locations than regions");

    const std::size_t n = locations.size();
    Rng rng(derive_seed(seed, 0x6b6d6561, 0));
    auto dist2 = [](const std::pair<double, double>& a, const std::pair<double, double>& b) {
        double dx = a.first - b.first, dy = a.second - b.second;
        return dx * dx + dy * dy;
    };

    // k-means++ seeding.
    std::vector<std::pair<double, double>> centers;
    centers.push_back(locations[rng.next_u64() % n]);
    std::vector<double> d2(n);
    while (static_cast<int>(centers.size()) < m) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = dist2(locations[i], centers[0]);
            for (std::size_t c = 1; c < centers.size(); ++c)
                best = std::min(best, dist2(locations[i], centers[c]));
            d2[i] = best;
            total += best;
        }
        if (total <= 0.0) {
            // all points covered; seed from a distinct location not yet used
            for (const auto& p : distinct)
                if (std::find(centers.begin(), centers.end(), p) == centers.end()) {
                    centers.push_back(p);
                    break;
                }
            continue;
        }
        centers.push_back(locations[rng.next_categorical(d2)]);
    }

    std::vector<int> assign(n, 0);
    for (int iter = 0; iter < 100; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double bd = dist2(locations[i], centers[0]);
            for (int c = 1; c < m; ++c) {
                double d = dist2(locations[i], centers[c]);
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            assign[i] = best;
        }
        std::vector<double> sx(m, 0.0), sy(m, 0.0);
        std::vector<long> cnt(m, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sx[assign[i]] += locations[i].first;
            sy[assign[i]] += locations[i].second;
            ++cnt[assign[i]];
        }
        double movement = 0.0;
        for (int c = 0; c < m; ++c) {
            if (cnt[c] == 0) continue;
            std::pair<double, double> nc{sx[c] / cnt[c], sy[c] / cnt[c]};
            movement = std::max(movement, std::sqrt(dist2(nc, centers[c])));
            centers[c] = nc;
        }
        if (movement < 1e-8) break;
    }

    RegionSet out;
    out.regions.resize(m);
    std::vector<long> cnt(m, 0);
    std::vector<double> sxx(m, 0.0), sxy(m, 0.0), syy(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        int c = assign[i];
        double dx = locations[i].first - centers[c].first;
        double dy = locations[i].second - centers[c].second;
        sxx[c] += dx * dx;
        sxy[c] += dx * dy;
        syy[c] += dy * dy;
        ++cnt[c];
    }
    for (int c = 0; c < m; ++c) {
        out.regions[c].mean = {centers[c].first, centers[c].second};
        double denom = cnt[c] > 0 ? double(cnt[c]) : 1.0;
        out.regions[c].cov = {sxx[c] / denom + 1e-4, sxy[c] / denom, syy[c] / denom + 1e-4};
    }
    return out;
}

RegionSet fit_regions(const std::vector<Document>& documents, int m, std::uint64_t seed) {
    std::vector<std::pair<double, double>> locs;
    locs.reserve(documents.size());
    for (const auto& d : documents) locs.emplace_back(d.lat, d.lon);
    return fit_regions(locs, m, seed);
}

std::string synthetic_token(int id) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "t%05d", id);
    return buf;
}

Vocabulary synthetic_vocabulary(int vocab_size) {
    Vocabulary v;
    v.min_frequency = 1;
    for (int i = 0; i < vocab_size; ++i) {
        v.token_to_id.emplace(synthetic_token(i), i);
        v.id_to_token.push_back(synthetic_token(i));
    }
    return v;
}

namespace {

struct GenCluster {
    std::vector<double> phi;           // natural topic parameter
    std::vector<double> pi;            // natural region parameter
    std::vector<double> topic_probs;   // logistic(phi), current epoch
    std::vector<double> topic_cdf;     // running sums of the above
    std::vector<double> region_probs;  // logistic(pi), current epoch
    std::map<int, int> doc_counts;     // epoch -> m
};

// Same draw as the linear scan over probs, but O(log V) via the cdf.
int draw_from_cdf(const std::vector<double>& cdf, Rng& rng) {
    double u = rng.next_double();
    auto it = std::upper_bound(cdf.begin(), cdf.end() - 1, u);
    return static_cast<int>(it - cdf.begin());
}

double decayed_gen_mass(const GenCluster& c, int t, const Hyperparams& h) {
    double mass = 0.0;
    for (int d = 0; d <= h.delta; ++d) {
        int e = t - d;
        if (e < 0) break;
        auto it = c.doc_counts.find(e);
        if (it != c.doc_counts.end() && it->second > 0)
            mass += std::exp(-double(d) / h.alpha) * it->second;
    }
    return mass;
}

int draw_from_probs(const std::vector<double>& probs, Rng& rng) {
    double u = rng.next_double();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SynthConfig& config, std::uint64_t seed) {
    if (config.epochs < 1 || config.docs_per_epoch < 1 || config.vocab_size < 1 ||
        config.num_regions < 1 || config.tokens_per_doc < 1 || config.initial_clusters < 1)
        throw std::invalid_argument("generate_synthetic: sizes must be positive");

    const Hyperparams& h = config.h;
    const int v_dim = config.vocab_size;
    const int m_dim = config.num_regions;
    Rng rng(derive_seed(seed, 0x73796e74, 0));

    SyntheticCorpus out;
    out.vocab_size = v_dim;

    // Region grid with unit covariance, spaced far enough apart that regions
    // are distinguishable.
    const int grid = static_cast<int>(std::ceil(std::sqrt(double(m_dim))));
    for (int g = 0; g < m_dim; ++g) {
        Region r;
        r.mean = {-40.0 + 10.0 * (g / grid), -40.0 + 10.0 * (g % grid)};
        r.cov = {1.0, 0.0, 1.0};
        out.truth.regions.regions.push_back(r);
    }

    const double topic_sd = std::sqrt(std::max(h.tau0, 0.0));
    const double region_sd = std::sqrt(std::max(h.rho0, 0.0));
    std::vector<GenCluster> clusters;

    auto record = [&](std::size_t k, int t) {
        out.truth.topic_traj[k][t] = clusters[k].phi;
        out.truth.region_traj[k][t] = clusters[k].pi;
    };
    auto refresh_probs = [&](GenCluster& c) {
        c.topic_probs = logistic(c.phi);
        c.region_probs = logistic(c.pi);
        c.topic_cdf.resize(c.topic_probs.size());
        std::partial_sum(c.topic_probs.begin(), c.topic_probs.end(), c.topic_cdf.begin());
    };
    auto birth = [&](int t) -> std::size_t {
        GenCluster c;
        c.phi.resize(v_dim);
        c.pi.resize(m_dim);
        for (double& x : c.phi) x = topic_sd * rng.next_gaussian();
        for (double& x : c.pi) x = region_sd * rng.next_gaussian();
        refresh_probs(c);
        clusters.push_back(std::move(c));
        out.truth.topic_traj.emplace_back();
        out.truth.region_traj.emplace_back();
        record(clusters.size() - 1, t);
        return clusters.size() - 1;
    };

    int stream_index = 0;
    for (int t = 0; t < config.epochs; ++t) {
        for (std::size_t k = 0; k < clusters.size(); ++k) {
            if (t > 0) {
                for (double& x : clusters[k].phi) x += topic_sd * rng.next_gaussian();
                for (double& x : clusters[k].pi) x += region_sd * rng.next_gaussian();
                refresh_probs(clusters[k]);
            }
            record(k, t);
        }
        for (int d = 0; d < config.docs_per_epoch; ++d) {
            std::size_t k;
            if (t == 0 && d < config.initial_clusters) {
                k = birth(t);  // seed K0 clusters with the first documents
            } else {
                std::vector<double> weights(clusters.size() + 1);
                for (std::size_t j = 0; j < clusters.size(); ++j)
                    weights[j] = decayed_gen_mass(clusters[j], t, h);
                weights[clusters.size()] = h.gamma;
                int pick = rng.next_categorical(weights);
                k = (pick == static_cast<int>(clusters.size())) ? birth(t)
                                                                : static_cast<std::size_t>(pick);
            }
            clusters[k].doc_counts[t] += 1;

            int z = draw_from_probs(clusters[k].region_probs, rng);
            const Region& reg = out.truth.regions.regions[z];
            // Cholesky of the 2x2 covariance.
            double la = std::sqrt(reg.cov[0]);
            double lb = reg.cov[1] / la;
            double lc = std::sqrt(std::max(reg.cov[2] - lb * lb, 1e-12));
            double g1 = rng.next_gaussian(), g2 = rng.next_gaussian();
            double lat = std::clamp(reg.mean[0] + la * g1, -90.0, 90.0);
            double lon = std::clamp(reg.mean[1] + lb * g1 + lc * g2, -180.0, 180.0);

            Document doc;
            doc.epoch = t;
            doc.index = stream_index++;
            doc.lat = lat;
            doc.lon = lon;
            for (int i = 0; i < config.tokens_per_doc; ++i)
                doc.token_counts[draw_from_cdf(clusters[k].topic_cdf, rng)] += 1;
            out.documents.push_back(std::move(doc));
            out.truth.assignments.push_back(Assignment{static_cast<int>(k), z});
        }
    }
    return out;
}

void write_truth(std::ostream& out, const SyntheticCorpus& corpus) {
    json j;
    j["format"] = "esed-truth-v1";
    j["vocab_size"] = corpus.vocab_size;
    json assignments = json::array();
    for (const auto& a : corpus.truth.assignments) assignments.push_back({a.event, a.region});
    j["assignments"] = assignments;
    json regions = json::array();
    for (const auto& r : corpus.truth.regions.regions)
        regions.push_back({{"mean", r.mean}, {"cov", r.cov}});
    j["regions"] = regions;
    auto traj_to_json = [](const std::vector<std::map<int, std::vector<double>>>& traj) {
        json out_t = json::array();
        for (const auto& per_cluster : traj) {
            json jc = json::object();
            for (const auto& [epoch, vec] : per_cluster) jc[std::to_string(epoch)] = vec;
            out_t.push_back(jc);
        }
        return out_t;
    };
    j["topic_traj"] = traj_to_json(corpus.truth.topic_traj);
    j["region_traj"] = traj_to_json(corpus.truth.region_traj);
    out << j.dump(1) << '\n';
}

SyntheticTruth load_truth(std::istream& in) {
    json j = json::parse(in);
    SyntheticTruth t;
    for (const auto& a : j.at("assignments"))
        t.assignments.push_back(Assignment{a.at(0).get<int>(), a.at(1).get<int>()});
    for (const auto& r : j.at("regions")) {
        Region reg;
        reg.mean = r.at("mean").get<std::array<double, 2>>();
        reg.cov = r.at("cov").get<std::array<double, 3>>();
        t.regions.regions.push_back(reg);
    }
    auto traj_from_json = [](const json& jt) {
        std::vector<std::map<int, std::vector<double>>> traj;
        for (const auto& jc : jt) {
            std::map<int, std::vector<double>> per;
            for (const auto& [key, val] : jc.items())
                per[std::stoi(key)] = val.get<std::vector<double>>();
            traj.push_back(std::move(per));
        }
        return traj;
    };
    t.topic_traj = traj_from_json(j.at("topic_traj"));
    t.region_traj = traj_from_json(j.at("region_traj"));
    return t;
}

}  // namespace esed
