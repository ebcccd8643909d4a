#include "esed/checkpoint.hpp"

#include <fstream>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace esed {

using json = nlohmann::ordered_json;

namespace {

json counts_to_json(const std::map<int, int>& m) {
    json j = json::array();
    for (const auto& [k, v] : m) j.push_back({k, v});
    return j;
}

std::map<int, int> counts_from_json(const json& j) {
    std::map<int, int> m;
    for (const auto& e : j) m[e.at(0).get<int>()] = e.at(1).get<int>();
    return m;
}

json nested_counts_to_json(const std::map<int, std::map<int, int>>& m) {
    json j = json::array();
    for (const auto& [k, inner] : m) j.push_back({k, counts_to_json(inner)});
    return j;
}

std::map<int, std::map<int, int>> nested_counts_from_json(const json& j) {
    std::map<int, std::map<int, int>> m;
    for (const auto& e : j) m[e.at(0).get<int>()] = counts_from_json(e.at(1));
    return m;
}

json cluster_to_json(const ClusterState& c) {
    json j;
    j["id"] = c.id;
    j["birth_epoch"] = c.birth_epoch;
    j["doc_counts"] = counts_to_json(c.doc_counts);
    j["word_counts"] = nested_counts_to_json(c.word_counts);
    j["region_counts"] = nested_counts_to_json(c.region_counts);
    j["token_totals"] = counts_to_json(c.token_totals);
    j["word_hist"] = counts_to_json(c.word_hist);
    j["region_hist"] = counts_to_json(c.region_hist);
    j["docs_total"] = c.docs_total;
    j["tokens_total"] = c.tokens_total;
    j["prior_topic"] = c.prior_topic;
    j["prior_region"] = c.prior_region;
    return j;
}

ClusterState cluster_from_json(const json& j) {
    ClusterState c;
    c.id = j.at("id").get<int>();
    c.birth_epoch = j.at("birth_epoch").get<int>();
    c.doc_counts = counts_from_json(j.at("doc_counts"));
    c.word_counts = nested_counts_from_json(j.at("word_counts"));
    c.region_counts = nested_counts_from_json(j.at("region_counts"));
    c.token_totals = counts_from_json(j.at("token_totals"));
    c.word_hist = counts_from_json(j.at("word_hist"));
    c.region_hist = counts_from_json(j.at("region_hist"));
    c.docs_total = j.at("docs_total").get<int>();
    c.tokens_total = j.at("tokens_total").get<int>();
    c.prior_topic = j.at("prior_topic").get<std::vector<double>>();
    c.prior_region = j.at("prior_region").get<std::vector<double>>();
    return c;
}

json hyperparams_to_json(const Hyperparams& h) {
    json j;
    j["gamma"] = h.gamma;
    j["alpha"] = h.alpha;
    j["delta"] = h.delta;
    j["rho0"] = h.rho0;
    j["tau0"] = h.tau0;
    j["num_particles"] = h.num_particles;
    j["max_iter"] = h.max_iter;
    j["ess_threshold"] = h.ess_threshold;
    j["num_regions"] = h.num_regions;
    j["solution"] = to_string(h.solution);
    return j;
}

Hyperparams hyperparams_from_json(const json& j) {
    Hyperparams h;
    h.gamma = j.at("gamma").get<double>();
    h.alpha = j.at("alpha").get<double>();
    h.delta = j.at("delta").get<int>();
    h.rho0 = j.at("rho0").get<double>();
    h.tau0 = j.at("tau0").get<double>();
    h.num_particles = j.at("num_particles").get<int>();
    h.max_iter = j.at("max_iter").get<int>();
    h.ess_threshold = j.at("ess_threshold").get<double>();
    h.num_regions = j.at("num_regions").get<int>();
    h.solution = solution_from_string(j.at("solution").get<std::string>());
    return h;
}

}  // namespace

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
    json j;
    j["format"] = "esed-checkpoint-v1";
    j["epoch"] = ckpt.state.epoch;
    j["docs_processed"] = ckpt.state.docs_processed;
    j["rng_seed"] = ckpt.state.rng_seed;
    j["vocab_size"] = ckpt.state.vocab_size;
    j["hyperparams"] = hyperparams_to_json(ckpt.state.params);
    j["vocab"] = {{"min_frequency", ckpt.vocab.min_frequency},
                  {"tokens", ckpt.vocab.id_to_token}};
    json regions = json::array();
    for (const auto& r : ckpt.regions.regions)
        regions.push_back({{"mean", r.mean}, {"cov", r.cov}});
    j["regions"] = regions;
    json particles = json::array();
    for (const auto& p : ckpt.state.particles) {
        json jp;
        jp["log_weight"] = p.log_weight;
        jp["next_cluster_id"] = p.next_cluster_id;
        json clusters = json::array();
        for (const auto& c : p.clusters) clusters.push_back(cluster_to_json(*c));
        jp["clusters"] = clusters;
        json assignments = json::array();
        for (int doc = 0; doc < p.assignments.capacity(); ++doc)
            if (const Assignment* a = p.assignments.get(doc))
                assignments.push_back({doc, a->event, a->region});
        jp["assignments"] = assignments;
        particles.push_back(std::move(jp));
    }
    j["particles"] = particles;
    out << j.dump() << '\n';
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open checkpoint file for writing: " + path);
    save_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(std::istream& in) {
    json j = json::parse(in);
    if (j.at("format").get<std::string>() != "esed-checkpoint-v1")
        throw std::runtime_error("unrecognized checkpoint format");
    Checkpoint ckpt;
    ckpt.state.epoch = j.at("epoch").get<int>();
    ckpt.state.docs_processed = j.at("docs_processed").get<long>();
    ckpt.state.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    ckpt.state.vocab_size = j.at("vocab_size").get<int>();
    ckpt.state.params = hyperparams_from_json(j.at("hyperparams"));
    ckpt.vocab.min_frequency = j.at("vocab").at("min_frequency").get<int>();
    ckpt.vocab.id_to_token = j.at("vocab").at("tokens").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < ckpt.vocab.id_to_token.size(); ++i)
        ckpt.vocab.token_to_id.emplace(ckpt.vocab.id_to_token[i], static_cast<int>(i));
    for (const auto& r : j.at("regions")) {
        Region reg;
        reg.mean = r.at("mean").get<std::array<double, 2>>();
        reg.cov = r.at("cov").get<std::array<double, 3>>();
        ckpt.regions.regions.push_back(reg);
    }
    for (const auto& jp : j.at("particles")) {
        Particle p;
        p.log_weight = jp.at("log_weight").get<double>();
        p.next_cluster_id = jp.at("next_cluster_id").get<int>();
        for (const auto& jc : jp.at("clusters"))
            p.clusters.push_back(std::make_shared<ClusterState>(cluster_from_json(jc)));
        for (const auto& ja : jp.at("assignments"))
            p.assignments[ja.at(0).get<int>()] =
                Assignment{ja.at(1).get<int>(), ja.at(2).get<int>()};
        ckpt.state.particles.push_back(std::move(p));
    }
    return ckpt;
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint file: " + path);
    return load_checkpoint(in);
}

}  // namespace esed
