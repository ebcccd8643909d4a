// Command-line driver: train / eval / synth / sweep.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "esed/checkpoint.hpp"
#include "esed/corpus.hpp"
#include "esed/eval.hpp"
#include "esed/smc.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace esed;

namespace {

struct TrainConfig {
    std::string corpus_path;
    double epoch_width_seconds = 86400.0;
    int min_frequency = 5;
    double train_fraction = 1.0;  // < 1 holds out a test split
    int top_words = 10;
    int threads = 1;
    std::uint64_t seed = 42;
    Hyperparams h;
};

template <typename T>
T get_field(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const std::exception&) {
        throw std::runtime_error("config field '" + key + "' has the wrong type");
    }
}

Hyperparams parse_hyperparams(const json& j, Hyperparams h) {
    h.gamma = get_field(j, "gamma", h.gamma);
    h.alpha = get_field(j, "alpha", h.alpha);
    h.delta = get_field(j, "delta", h.delta);
    h.rho0 = get_field(j, "rho0", h.rho0);
    h.tau0 = get_field(j, "tau0", h.tau0);
    h.num_particles = get_field(j, "num_particles", h.num_particles);
    h.max_iter = get_field(j, "max_iter", h.max_iter);
    h.ess_threshold = get_field(j, "ess_threshold", std::max(1.0, h.num_particles / 2.0));
    h.num_regions = get_field(j, "num_regions", h.num_regions);
    if (j.contains("solution")) h.solution = solution_from_string(j.at("solution").get<std::string>());
    return h;
}

json hyperparams_json(const Hyperparams& h) {
    return json{{"gamma", h.gamma},
                {"alpha", h.alpha},
                {"delta", h.delta},
                {"rho0", h.rho0},
                {"tau0", h.tau0},
                {"num_particles", h.num_particles},
                {"max_iter", h.max_iter},
                {"ess_threshold", h.ess_threshold},
                {"num_regions", h.num_regions},
                {"solution", to_string(h.solution)}};
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    try {
        return json::parse(in);
    } catch (const std::exception& e) {
        throw std::runtime_error("failed to parse " + path + ": " + e.what());
    }
}

TrainConfig parse_train_config(const json& j) {
    TrainConfig cfg;
    if (!j.contains("corpus")) throw std::runtime_error("config field 'corpus' is required");
    cfg.corpus_path = j.at("corpus").get<std::string>();
    cfg.epoch_width_seconds = get_field(j, "epoch_width_seconds", cfg.epoch_width_seconds);
    cfg.min_frequency = get_field(j, "min_frequency", cfg.min_frequency);
    cfg.train_fraction = get_field(j, "train_fraction", cfg.train_fraction);
    cfg.top_words = get_field(j, "top_words", cfg.top_words);
    cfg.threads = get_field(j, "threads", cfg.threads);
    cfg.seed = get_field<std::uint64_t>(j, "seed", cfg.seed);
    cfg.h = parse_hyperparams(j.contains("hyperparams") ? j.at("hyperparams") : json::object(),
                              Hyperparams{});
    return cfg;
}

json manifest_json(const TrainConfig& cfg) {
    return json{{"corpus", cfg.corpus_path},
                {"epoch_width_seconds", cfg.epoch_width_seconds},
                {"min_frequency", cfg.min_frequency},
                {"train_fraction", cfg.train_fraction},
                {"top_words", cfg.top_words},
                {"threads", cfg.threads},
                {"seed", cfg.seed},
                {"hyperparams", hyperparams_json(cfg.h)}};
}

// One line per (cluster, epoch): document count, region weights, top words.
void append_event_summaries(std::ostream& out, const FilterState& state, int epoch,
                            const Vocabulary& vocab, int top_n) {
    const Particle* best = &state.particles[0];
    for (const auto& p : state.particles)
        if (p.log_weight > best->log_weight) best = &p;
    for (const auto& cp : best->clusters) {
        const ClusterState& c = *cp;
        if (c.docs_at(epoch) == 0) continue;
        const EstimateCache& est = estimates(c, epoch, state.params, state.vocab_size);
        std::vector<int> order(state.vocab_size);
        std::iota(order.begin(), order.end(), 0);
        int n = std::min<int>(top_n, state.vocab_size);
        std::partial_sort(order.begin(), order.begin() + n, order.end(),
                          [&](int a, int b) { return est.topic[a] > est.topic[b]; });
        json top = json::array();
        for (int i = 0; i < n; ++i)
            top.push_back({{"token", vocab.id_to_token.at(order[i])},
                           {"weight", est.topic[order[i]]}});
        json line{{"epoch", epoch},
                  {"cluster", c.id},
                  {"documents", c.docs_at(epoch)},
                  {"top_words", top},
                  {"region_weights", est.region}};
        out << line.dump() << '\n';
    }
}

struct TrainResult {
    Checkpoint ckpt;
    std::vector<Document> test_docs;
};

TrainResult run_training(const TrainConfig& cfg, const fs::path& out_dir, bool write_outputs) {
    LoadOptions lo;
    lo.min_frequency = cfg.min_frequency;
    lo.epoch_width_seconds = cfg.epoch_width_seconds;
    Corpus corpus = load_corpus(cfg.corpus_path, lo);
    if (corpus.documents.empty()) throw std::runtime_error("corpus is empty after filtering");
    if (corpus.dropped_empty > 0)
        std::cerr << "dropped " << corpus.dropped_empty << " documents with no retained tokens\n";

    std::vector<Document> train_docs = corpus.documents;
    std::vector<Document> test_docs;
    if (cfg.train_fraction < 1.0)
        std::tie(train_docs, test_docs) = split(corpus.documents, cfg.train_fraction, cfg.seed);

    RegionSet regions = fit_regions(train_docs, cfg.h.num_regions, cfg.seed);

    std::ofstream events;
    if (write_outputs) {
        events.open(out_dir / "events.jsonl");
        if (!events) throw std::runtime_error("cannot write events file");
    }
    RunOptions ro;
    ro.threads = cfg.threads;
    if (write_outputs)
        ro.on_epoch_boundary = [&](const FilterState& s) {
            append_event_summaries(events, s, s.epoch, corpus.vocab, cfg.top_words);
        };
    FilterState state = run(train_docs, regions, cfg.h, cfg.seed, ro);
    if (write_outputs)
        append_event_summaries(events, state, state.epoch, corpus.vocab, cfg.top_words);

    TrainResult result;
    result.ckpt = Checkpoint{std::move(state), std::move(corpus.vocab), std::move(regions)};
    result.test_docs = std::move(test_docs);
    return result;
}

void write_metrics_csv(std::ostream& out, const std::string& run_id,
                       const std::vector<std::pair<std::string, double>>& metrics) {
    out << "run_id,metric,value\n";
    char buf[64];
    for (const auto& [name, value] : metrics) {
        std::snprintf(buf, sizeof(buf), "%.17g", value);
        out << run_id << ',' << name << ',' << buf << '\n';
    }
}

std::vector<std::pair<std::string, double>> evaluate(const Checkpoint& ckpt,
                                                     std::span<const Document> test_docs) {
    double perp = perplexity(test_docs, ckpt.state, ckpt.regions, ckpt.state.params);
    double mse = location_mse(test_docs, ckpt.state, ckpt.regions, ckpt.state.params);
    return {{"perplexity", perp}, {"exp_perplexity", std::exp(perp)}, {"location_mse", mse}};
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed, std::optional<int> threads) {
    TrainConfig cfg = parse_train_config(load_json(config_path));
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    cfg.h.validate();
    fs::create_directories(out_dir);

    TrainResult result = run_training(cfg, out_dir, /*write_outputs=*/true);
    save_checkpoint((fs::path(out_dir) / "checkpoint.json").string(), result.ckpt);
    std::ofstream manifest(fs::path(out_dir) / "manifest.json");
    manifest << manifest_json(cfg).dump(1) << '\n';
    if (!result.test_docs.empty()) {
        std::ofstream test_out(fs::path(out_dir) / "test.tsv");
        write_corpus(test_out, result.test_docs, result.ckpt.vocab, cfg.epoch_width_seconds);
    }
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& test_path,
             const std::string& out_dir) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    LoadOptions lo;
    lo.fixed_vocab = &ckpt.vocab;
    Corpus test = load_corpus(test_path, lo);
    long known_tokens = 0;
    for (const auto& d : test.documents) known_tokens += d.total_tokens();
    if (known_tokens == 0)
        throw std::runtime_error(
            "vocabulary mismatch: test corpus shares no tokens with the checkpoint vocabulary");
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "metrics.csv");
    write_metrics_csv(out, "eval", evaluate(ckpt, test.documents));
    return 0;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed_override) {
    json j = load_json(config_path);
    SynthConfig cfg;
    cfg.initial_clusters = get_field(j, "initial_clusters", cfg.initial_clusters);
    cfg.epochs = get_field(j, "epochs", cfg.epochs);
    cfg.docs_per_epoch = get_field(j, "docs_per_epoch", cfg.docs_per_epoch);
    cfg.vocab_size = get_field(j, "vocab_size", cfg.vocab_size);
    cfg.num_regions = get_field(j, "num_regions", cfg.num_regions);
    cfg.tokens_per_doc = get_field(j, "tokens_per_doc", cfg.tokens_per_doc);
    cfg.h = parse_hyperparams(j.contains("hyperparams") ? j.at("hyperparams") : json::object(),
                              cfg.h);
    cfg.h.num_regions = cfg.num_regions;
    std::uint64_t seed = get_field<std::uint64_t>(j, "seed", 42);
    if (seed_override) seed = *seed_override;
    double width = get_field(j, "epoch_width_seconds", 86400.0);

    SyntheticCorpus synth = generate_synthetic(cfg, seed);
    fs::create_directories(out_dir);
    Vocabulary vocab = synthetic_vocabulary(cfg.vocab_size);
    std::ofstream corpus_out(fs::path(out_dir) / "corpus.tsv");
    write_corpus(corpus_out, synth.documents, vocab, width);
    std::ofstream truth_out(fs::path(out_dir) / "truth.json");
    write_truth(truth_out, synth);
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& grid_path,
              const std::string& out_dir, std::optional<std::uint64_t> seed,
              std::optional<int> threads, bool parallel) {
    TrainConfig base = parse_train_config(load_json(config_path));
    if (seed) base.seed = *seed;
    if (threads) base.threads = *threads;
    if (base.train_fraction >= 1.0) base.train_fraction = 0.9;
    json grid = load_json(grid_path);

    const std::vector<std::string> allowed{"alpha", "gamma", "tau0", "rho0", "solution"};
    std::vector<std::string> axes;
    std::vector<std::vector<json>> values;
    for (const auto& name : allowed) {
        if (!grid.contains(name)) continue;
        axes.push_back(name);
        values.push_back(std::vector<json>(grid.at(name).begin(), grid.at(name).end()));
    }
    for (const auto& [key, _] : grid.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw std::runtime_error("grid parameter '" + key + "' is not sweepable");

    std::vector<std::vector<json>> points{{}};
    for (const auto& axis_values : values) {
        std::vector<std::vector<json>> next;
        for (const auto& p : points)
            for (const auto& v : axis_values) {
                auto q = p;
                q.push_back(v);
                next.push_back(std::move(q));
            }
        points = std::move(next);
    }

    fs::create_directories(out_dir);
    std::vector<std::string> rows(points.size());
    auto run_point = [&](std::size_t i) {
        TrainConfig cfg = base;
        std::string run_id = "point" + std::to_string(i);
        std::ostringstream fields;
        for (std::size_t a = 0; a < axes.size(); ++a) {
            const json& v = points[i][a];
            if (axes[a] == "alpha") cfg.h.alpha = v.get<double>();
            else if (axes[a] == "gamma") cfg.h.gamma = v.get<double>();
            else if (axes[a] == "tau0") cfg.h.tau0 = v.get<double>();
            else if (axes[a] == "rho0") cfg.h.rho0 = v.get<double>();
            else cfg.h.solution = solution_from_string(v.get<std::string>());
            fields << ',' << (v.is_string() ? v.get<std::string>() : v.dump());
        }
        std::ostringstream row;
        try {
            cfg.h.validate();
            TrainResult result = run_training(cfg, out_dir, /*write_outputs=*/false);
            if (result.test_docs.empty()) throw std::runtime_error("empty held-out split");
            for (const auto& [name, value] : evaluate(result.ckpt, result.test_docs)) {
                char buf[64];
                std::snprintf(buf, sizeof(buf), "%.17g", value);
                row << run_id << fields.str() << ',' << hyperparams_json(cfg.h).dump() << ','
                    << name << ',' << buf << ",ok\n";
            }
        } catch (const std::exception& e) {
            std::string msg = e.what();
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            row << run_id << fields.str() << ',' << hyperparams_json(cfg.h).dump()
                << ",error,nan," << msg << '\n';
        }
        rows[i] = row.str();
    };
    if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
        for (std::size_t i = 0; i < points.size(); ++i) run_point(i);
    } else {
        for (std::size_t i = 0; i < points.size(); ++i) run_point(i);
    }

    std::ofstream out(fs::path(out_dir) / "sweep.csv");
    out << "run_id";
    for (const auto& a : axes) out << ',' << a;
    out << ",hyperparams,metric,value,status\n";
    for (const auto& r : rows) out << r;

    std::ofstream manifest(fs::path(out_dir) / "manifest.json");
    json m = manifest_json(base);
    m["grid"] = grid;
    manifest << m.dump(1) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online inference for evolving spatio-temporal event clusters"};
    app.require_subcommand(1);

    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    app.add_option("--seed", seed, "Override the config seed");
    app.add_option("--threads", threads, "Worker threads for the particle loop");

    std::string config_path, out_dir, ckpt_path, test_path, grid_path;
    bool parallel = false;

    auto* train = app.add_subcommand("train", "Run the particle filter over a corpus");
    train->add_option("--config", config_path, "Training config (JSON)")->required();
    train->add_option("--out", out_dir, "Output directory")->required();

    auto* eval_cmd = app.add_subcommand("eval", "Score a held-out corpus against a checkpoint");
    eval_cmd->add_option("--checkpoint", ckpt_path, "Checkpoint path")->required();
    eval_cmd->add_option("--test", test_path, "Held-out corpus path")->required();
    eval_cmd->add_option("--out", out_dir, "Output directory")->required();

    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with ground truth");
    synth->add_option("--config", config_path, "Generator config (JSON)")->required();
    synth->add_option("--out", out_dir, "Output directory")->required();

    auto* sweep = app.add_subcommand("sweep", "Train and evaluate over a parameter grid");
    sweep->add_option("--config", config_path, "Base training config (JSON)")->required();
    sweep->add_option("--grid", grid_path, "Parameter grid (JSON)")->required();
    sweep->add_option("--out", out_dir, "Output directory")->required();
    sweep->add_flag("--parallel", parallel, "Run grid points in parallel");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(config_path, out_dir, seed, threads);
        if (eval_cmd->parsed()) return cmd_eval(ckpt_path, test_path, out_dir);
        if (synth->parsed()) return cmd_synth(config_path, out_dir, seed);
        if (sweep->parsed()) return cmd_sweep(config_path, grid_path, out_dir, seed, threads, parallel);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
