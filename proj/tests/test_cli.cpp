#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fog/cli.hpp"
#include "fog/report.hpp"

using namespace fog;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "fogsim_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
    std::vector<std::string> out;
    std::ifstream in(p);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
    const auto path = dir / "config.json";
    std::ofstream(path) << text;
    return path;
}

const char* kSmall = R"({
  "seed": 4,
  "data": {"samples_per_device": 30, "feature_dim": 4, "classes": 3, "test_samples": 100},
  "layers": [
    {"nodes": 10, "cluster_size": 5, "d2d": "complete", "mode": "d2d_consensus"},
    {"nodes": 2, "cluster_size": 2},
    {"nodes": 1}
  ],
  "training": {"global_rounds": 4}
})";

std::map<std::string, std::string> key_values(const fs::path& p) {
    std::map<std::string, std::string> out;
    for (const auto& line : lines(p)) {
        const auto eq = line.find('=');
        if (line.starts_with("#") || eq == std::string::npos) continue;
        out[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return out;
}

int run_binary(const std::string& args, const fs::path& err) {
    const auto cmd = std::string(FOGSIM_PATH) + " " + args + " 2> " + err.string() + " > /dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("run writes metrics, events and summary with provenance headers") {
    const auto dir = scratch("run");
    const auto cfg = write_config(dir, kSmall);
    std::ostringstream err;
    REQUIRE(cmd_run(cfg.string(), std::nullopt, (dir / "out").string(), err) == 0);

    const auto parsed = load_config(cfg.string());
    REQUIRE(parsed.violations.empty());
    for (const auto* name : {"metrics.csv", "events.log", "summary.txt", "manifest.txt"}) {
        const auto first = lines(dir / "out" / name).front();
        const auto prov = read_provenance(first);
        REQUIRE(prov.has_value());
        CHECK(prov->config_hash == config_hash(parsed.config));
        CHECK(prov->seed == "4");
    }
    const auto metrics = lines(dir / "out" / "metrics.csv");
    CHECK(metrics.size() == 2 + 4);
    CHECK(metrics[1] ==
          "round,global_loss,global_accuracy,uplink_params,downlink_params,d2d_params,total_energy_j,round_delay_s,"
          "stragglers_dropped,clusters_sampled,samples_moved");

    // Events parse back.
    const auto events = lines(dir / "out" / "events.log");
    for (std::size_t i = 1; i < events.size(); ++i) CHECK_NOTHROW(parse_event(events[i]));
}

TEST_CASE("repeated runs are byte-identical; --seed changes the output") {
    const auto dir = scratch("repeat");
    const auto cfg = write_config(dir, kSmall);
    std::ostringstream err;
    REQUIRE(cmd_run(cfg.string(), std::nullopt, (dir / "a").string(), err) == 0);
    REQUIRE(cmd_run(cfg.string(), std::nullopt, (dir / "b").string(), err) == 0);
    REQUIRE(cmd_run(cfg.string(), 99, (dir / "c").string(), err) == 0);
    CHECK(slurp(dir / "a" / "metrics.csv") == slurp(dir / "b" / "metrics.csv"));
    CHECK(slurp(dir / "a" / "events.log") == slurp(dir / "b" / "events.log"));
    CHECK(slurp(dir / "a" / "metrics.csv") != slurp(dir / "c" / "metrics.csv"));
}

TEST_CASE("invalid configs exit 2 and name every violation") {
    const auto dir = scratch("invalid");
    std::string text = kSmall;
    text.replace(text.find("\"seed\": 4"), 9, R"("seed": 4, "sampling_fraction": 0, "bogus": 1)");
    const auto cfg = write_config(dir, text);
    const auto err_file = dir / "err.txt";
    CHECK(run_binary("run --config " + cfg.string() + " --out " + (dir / "out").string(), err_file) == 2);
    const auto err = slurp(err_file);
    CHECK(err.find("bogus") != std::string::npos);

    // Semantic checks run once the document is well formed.
    text = kSmall;
    text.replace(text.find("\"seed\": 4"), 9, R"("seed": 4, "sampling_fraction": 0, "cache_fraction": 2)");
    write_config(dir, text);
    CHECK(run_binary("run --config " + cfg.string() + " --out " + (dir / "out").string(), err_file) == 2);
    const auto err2 = slurp(err_file);
    CHECK(err2.find("sampling_fraction") != std::string::npos);
    CHECK(err2.find("cache_fraction") != std::string::npos);

    CHECK(run_binary("run --config " + (dir / "missing.json").string(), err_file) == 2);
}

TEST_CASE("compare: self-comparison of a star gives factors of 1") {
    const auto dir = scratch("star");
    const auto cfg = write_config(dir, R"({
      "data": {"samples_per_device": 30, "feature_dim": 4, "classes": 3, "test_samples": 100},
      "layers": [{"nodes": 6, "cluster_size": 6}, {"nodes": 1}],
      "training": {"global_rounds": 3}
    })");
    std::ostringstream err;
    REQUIRE(cmd_compare(cfg.string(), std::nullopt, (dir / "out").string(), err) == 0);
    const auto s = key_values(dir / "out" / "summary.txt");
    CHECK(std::stod(s.at("uplink_reduction_factor")) == 1.0);
    CHECK(std::stod(s.at("energy_reduction_factor")) == 1.0);
}

TEST_CASE("compare: clusters of 5 with one uploader give a factor of 5 every round") {
    const auto dir = scratch("five");
    const auto cfg = write_config(dir, kSmall);
    std::ostringstream err;
    REQUIRE(cmd_compare(cfg.string(), std::nullopt, (dir / "out").string(), err) == 0);
    const auto rows = lines(dir / "out" / "compare.csv");
    REQUIRE(rows.size() == 2 + 4);
    for (std::size_t i = 2; i < rows.size(); ++i) {
        std::vector<std::string> cells;
        std::stringstream ss(rows[i]);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        CHECK(std::stod(cells.at(6)) == 5.0);
    }
    const auto s = key_values(dir / "out" / "summary.txt");
    CHECK(std::stod(s.at("uplink_reduction_factor")) == 5.0);

    // The summary gap is the last compare.csv row's gap.
    const auto last = rows.back();
    CHECK(last.substr(last.rfind(',') + 1) == s.at("accuracy_gap"));
}

TEST_CASE("sweep writes one file per run and an aggregate table") {
    const auto dir = scratch("sweep");
    const auto cfg = write_config(dir, kSmall);
    std::ostringstream err;
    const std::vector<std::string> values{"1", "2", "5", "10"};
    REQUIRE(cmd_sweep(cfg.string(), "consensus.rounds", values, {1, 2}, (dir / "par").string(), 3, err) == 0);
    REQUIRE(cmd_sweep(cfg.string(), "consensus.rounds", values, {1, 2}, (dir / "ser").string(), 1, err) == 0);

    std::size_t metrics_files = 0;
    for (const auto& entry : fs::directory_iterator(dir / "par"))
        if (entry.path().filename().string().starts_with("metrics_")) {
            ++metrics_files;
            CHECK(slurp(entry.path()) == slurp(dir / "ser" / entry.path().filename()));
        }
    CHECK(metrics_files == 8);

    const auto table = lines(dir / "par" / "sweep.csv");
    REQUIRE(table.size() == 2 + 4);
    CHECK(read_provenance(table[0]).has_value());
    double previous = INFINITY;
    for (std::size_t i = 2; i < table.size(); ++i) {
        std::vector<std::string> cells;
        std::stringstream ss(table[i]);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        const double error = std::stod(cells.at(10));
        CHECK(error <= previous);
        previous = error;
    }
}

TEST_CASE("sweep argument errors exit 2") {
    const auto dir = scratch("sweep_errors");
    const auto cfg = write_config(dir, kSmall);
    std::ostringstream err;
    CHECK(cmd_sweep(cfg.string(), "consensus.rounds", {}, {}, (dir / "o").string(), 1, err) == 2);
    CHECK(cmd_sweep(cfg.string(), "consensus.roundz", {"1"}, {}, (dir / "o").string(), 1, err) == 2);
    CHECK(cmd_sweep(cfg.string(), "consensus.rounds", {"0"}, {}, (dir / "o").string(), 1, err) == 2);
    CHECK(err.str().find("consensus.roundz") != std::string::npos);
    const auto err_file = dir / "err.txt";
    CHECK(run_binary("sweep --config " + cfg.string() + " --param layers.0.cluster_size --values", err_file) == 2);
}

TEST_CASE("dotted keys reach nested objects and arrays") {
    nlohmann::json doc{{"a", {{"b", 1}}}, {"list", {{{"x", 1}}, {{"x", 2}}}}};
    CHECK(set_dotted(doc, "a.b", 5));
    CHECK(doc["a"]["b"] == 5);
    CHECK(set_dotted(doc, "list.1.x", 7));
    CHECK(doc["list"][1]["x"] == 7);
    CHECK_FALSE(set_dotted(doc, "list.2.x", 7));
    CHECK_FALSE(set_dotted(doc, "a.c", 7));
}

TEST_CASE("shipped configs parse cleanly") {
    for (const auto& entry : fs::directory_iterator(CONFIG_DIR)) {
        const auto parsed = load_config(entry.path().string());
        INFO(entry.path().string());
        CHECK(parsed.violations.empty());
    }
}

}  // TEST_SUITE
