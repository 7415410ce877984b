// fogsim: run, compare or sweep fog-learning simulations from a JSON config.
#include <iostream>

#include <CLI11.hpp>

#include "fog/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Fog learning simulator"};
    app.require_subcommand(1);

    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;

    auto* run = app.add_subcommand("run", "Simulate one config; writes metrics.csv, events.log, summary.txt");
    auto* compare = app.add_subcommand("compare", "Fog vs star vs centralized on shared data; writes compare.csv");
    auto* sweep = app.add_subcommand("sweep", "Run a config over values of one key and several seeds");
    for (auto* sub : {run, compare, sweep}) {
        sub->add_option("--config", config, "JSON config file")->required();
        sub->add_option("--out", out, "Output directory");
    }
    run->add_option("--seed", seed, "Override the config seed");
    compare->add_option("--seed", seed, "Override the config seed");

    std::string param;
    std::vector<std::string> values;
    std::vector<std::uint64_t> seeds;
    int parallel = 1;
    sweep->add_option("--param", param, "Dotted config key, e.g. consensus.rounds")->required();
    sweep->add_option("--values", values, "Values for the key (JSON literals)")->required()->expected(0, -1);
    sweep->add_option("--seeds", seeds, "Seeds; defaults to the config seed");
    sweep->add_option("--parallel", parallel, "Concurrent simulations");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (*run) return fog::cmd_run(config, seed, out, std::cerr);
    if (*compare) return fog::cmd_compare(config, seed, out, std::cerr);
    return fog::cmd_sweep(config, param, values, seeds, out, parallel, std::cerr);
}
