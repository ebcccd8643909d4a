#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct CommandResult {
    int exit_code = 0;
    std::string stderr_text;
};

CommandResult run_cli(const std::string& args) {
    fs::path err = fs::temp_directory_path() / "esed_cli_stderr.txt";
    std::string cmd = std::string(ESED_BIN) + " " + args + " 2>" + err.string();
    int status = std::system(cmd.c_str());
    CommandResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(err);
    std::stringstream buf;
    buf << in.rdbuf();
    r.stderr_text = buf.str();
    return r;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path make_workdir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("esed_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

// ten documents over two epochs, two obvious token groups
void write_fixture_corpus(const fs::path& p) {
    std::ostringstream out;
    for (int i = 0; i < 5; ++i)
        out << i * 100 << "\t10.0\t10.0\tstorm flood rain storm\n";
    for (int i = 0; i < 5; ++i)
        out << 86400 + i * 100 << "\t-10.0\t-10.0\tgame match goal game\n";
    write_file(p, out.str());
}

std::string train_config(const fs::path& corpus, double train_fraction = 1.0) {
    std::ostringstream cfg;
    cfg << "{\"corpus\": \"" << corpus.string() << "\", \"min_frequency\": 1,"
        << " \"train_fraction\": " << train_fraction << ", \"seed\": 4,"
        << " \"hyperparams\": {\"num_particles\": 4, \"num_regions\": 2,"
        << " \"ess_threshold\": 2}}";
    return cfg.str();
}
}  // namespace

TEST_CASE("training on a small fixture emits the advertised artifacts") {
    fs::path dir = make_workdir("train");
    write_fixture_corpus(dir / "corpus.tsv");
    write_file(dir / "config.json", train_config(dir / "corpus.tsv"));
    auto r = run_cli("train --config " + (dir / "config.json").string() + " --out " +
                     (dir / "run").string());
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(dir / "run/checkpoint.json"));
    CHECK(fs::exists(dir / "run/manifest.json"));
    std::string events = read_file(dir / "run/events.jsonl");
    CHECK(events.find("\"top_words\"") != std::string::npos);
    CHECK(std::count(events.begin(), events.end(), '\n') >= 1);
    std::string manifest = read_file(dir / "run/manifest.json");
    CHECK(manifest.find("\"gamma\"") != std::string::npos);
    CHECK(manifest.find("\"seed\"") != std::string::npos);
}

TEST_CASE("a missing corpus field is a config error naming the field") {
    fs::path dir = make_workdir("badcfg");
    write_file(dir / "config.json", "{\"seed\": 1}");
    auto r = run_cli("train --config " + (dir / "config.json").string() + " --out " +
                     (dir / "run").string());
    CHECK(r.exit_code != 0);
    CHECK(r.stderr_text.find("corpus") != std::string::npos);
}

TEST_CASE("repeated runs with one seed are byte identical") {
    fs::path dir = make_workdir("determinism");
    write_fixture_corpus(dir / "corpus.tsv");
    write_file(dir / "config.json", train_config(dir / "corpus.tsv"));
    REQUIRE(run_cli("train --config " + (dir / "config.json").string() + " --out " +
                    (dir / "a").string())
                .exit_code == 0);
    REQUIRE(run_cli("train --config " + (dir / "config.json").string() + " --out " +
                    (dir / "b").string())
                .exit_code == 0);
    CHECK(read_file(dir / "a/checkpoint.json") == read_file(dir / "b/checkpoint.json"));
    CHECK(read_file(dir / "a/events.jsonl") == read_file(dir / "b/events.jsonl"));
}

TEST_CASE("evaluation writes metric rows and rejects alien vocabularies") {
    fs::path dir = make_workdir("eval");
    write_fixture_corpus(dir / "corpus.tsv");
    write_file(dir / "config.json", train_config(dir / "corpus.tsv", 0.8));
    REQUIRE(run_cli("train --config " + (dir / "config.json").string() + " --out " +
                    (dir / "run").string())
                .exit_code == 0);
    REQUIRE(fs::exists(dir / "run/test.tsv"));
    auto ok = run_cli("eval --checkpoint " + (dir / "run/checkpoint.json").string() +
                      " --test " + (dir / "run/test.tsv").string() + " --out " +
                      (dir / "metrics").string());
    CHECK(ok.exit_code == 0);
    std::string csv = read_file(dir / "metrics/metrics.csv");
    CHECK(csv.find("perplexity") != std::string::npos);
    CHECK(csv.find("exp_perplexity") != std::string::npos);
    CHECK(csv.find("location_mse") != std::string::npos);

    write_file(dir / "alien.tsv", "0\t0\t0\tzzz yyy xxx\n");
    auto bad = run_cli("eval --checkpoint " + (dir / "run/checkpoint.json").string() +
                       " --test " + (dir / "alien.tsv").string() + " --out " +
                       (dir / "metrics2").string());
    CHECK(bad.exit_code != 0);
    CHECK(bad.stderr_text.find("vocabulary") != std::string::npos);
}

TEST_CASE("synthesis is seed-deterministic and self-consistent") {
    fs::path dir = make_workdir("synth");
    write_file(dir / "config.json",
               "{\"initial_clusters\": 2, \"epochs\": 2, \"docs_per_epoch\": 10,"
               " \"vocab_size\": 12, \"num_regions\": 2, \"tokens_per_doc\": 5,"
               " \"seed\": 6}");
    REQUIRE(run_cli("synth --config " + (dir / "config.json").string() + " --out " +
                    (dir / "a").string())
                .exit_code == 0);
    REQUIRE(run_cli("synth --config " + (dir / "config.json").string() + " --out " +
                    (dir / "b").string())
                .exit_code == 0);
    std::string corpus = read_file(dir / "a/corpus.tsv");
    CHECK(corpus == read_file(dir / "b/corpus.tsv"));
    CHECK(read_file(dir / "a/truth.json") == read_file(dir / "b/truth.json"));
    long lines = std::count(corpus.begin(), corpus.end(), '\n');
    CHECK(lines == 20);
    CHECK(read_file(dir / "a/truth.json").find("assignments") != std::string::npos);
}

TEST_CASE("sweeps cover the grid and isolate failing points") {
    fs::path dir = make_workdir("sweep");
    write_fixture_corpus(dir / "corpus.tsv");
    write_file(dir / "config.json", train_config(dir / "corpus.tsv", 0.8));
    write_file(dir / "grid.json",
               "{\"alpha\": [0.5, -1.0], \"solution\": [\"s1\", \"s3\"]}");
    auto r = run_cli("sweep --config " + (dir / "config.json").string() + " --grid " +
                     (dir / "grid.json").string() + " --out " + (dir / "out").string());
    CHECK(r.exit_code == 0);
    std::string csv = read_file(dir / "out/sweep.csv");
    CHECK(csv.find(",ok") != std::string::npos);      // healthy points complete
    CHECK(csv.find(",error,") != std::string::npos);  // alpha = -1 points marked
    CHECK(csv.find("alpha") != std::string::npos);
    CHECK(csv.find("\"gamma\"") != std::string::npos);  // full config echoed per row
    // 2 alphas x 2 solutions: 2 good points x 3 metrics + 2 failed markers
    long rows = std::count(csv.begin(), csv.end(), '\n') - 1;
    CHECK(rows == 8);
    CHECK(fs::exists(dir / "out/manifest.json"));
}

TEST_CASE("unknown grid parameters are rejected") {
    fs::path dir = make_workdir("badgrid");
    write_fixture_corpus(dir / "corpus.tsv");
    write_file(dir / "config.json", train_config(dir / "corpus.tsv", 0.8));
    write_file(dir / "grid.json", "{\"num_particles\": [2, 4]}");
    auto r = run_cli("sweep --config " + (dir / "config.json").string() + " --grid " +
                     (dir / "grid.json").string() + " --out " + (dir / "out").string());
    CHECK(r.exit_code != 0);
    CHECK(r.stderr_text.find("num_particles") != std::string::npos);
}
