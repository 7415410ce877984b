#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fog/aggregation.hpp"
#include "fog/netmodel.hpp"
#include "fog/topology.hpp"

namespace fog {

/// Full experiment description. Defaults describe a small three-layer run.
struct SimulationConfig {
    std::uint64_t seed = 1;

    struct Data {
        std::size_t samples_per_device = 200;
        std::size_t feature_dim = 10;
        std::size_t classes = 3;
        double dirichlet_alpha = 0.5;
        std::size_t test_samples = 1000;
        double class_separation = 1.0;
    } data;

    // layers[0] are the devices; the last entry is the root.
    std::vector<LayerSpec> layers;

    struct Training {
        int global_rounds = 100;
        int local_steps = 5;
        double lr = 0.1;
    } training;

    struct Consensus {
        int rounds = 10;
        double sigma = 0.0;  // noise on every received D2D message
    } consensus;

    CompressionConfig compression;

    double sampling_fraction = 1.0;
    bool continue_unsampled = true;  // unsampled devices keep training locally

    struct Blocks {
        std::size_t layer = 1;  // layer of the block head nodes
        int vertical_period = 1;
        int intra_rounds = 1;
        std::vector<int> periods;  // per-head override, ascending head id
    } blocks;

    MobilityRates mobility;

    struct Offloading {
        bool enabled = false;
        double trust_density = 1.0;
    } offloading;

    double cache_fraction = 0.0;

    struct Compute {
        double samples_per_second = 1.0e4;
        double energy_per_sample_step = 1.0e-5;
        double slow_fraction = 0.0;
        double slow_factor = 5.0;
    } compute;

    std::optional<double> deadline;  // seconds; unset disables straggler drops
    CostModel costs;
    double battery_j = 1000.0;

    struct Baselines {
        bool star = true;
        bool centralized = true;
    } baselines;

    [[nodiscard]] std::size_t device_count() const { return layers.empty() ? 0 : layers.front().node_count; }
    [[nodiscard]] std::size_t parameter_count() const { return data.feature_dim * data.classes; }

    /// All semantic violations; empty when the config can run.
    [[nodiscard]] std::vector<std::string> validate() const;
};

struct ConfigParse {
    SimulationConfig config;
    std::vector<std::string> violations;  // unknown keys, type errors and validate() output
};

/// Parses the JSON schema documented in the README. Unknown keys are errors.
ConfigParse parse_config(const nlohmann::json& doc);
ConfigParse load_config(const std::string& path);

nlohmann::json to_json(const SimulationConfig& config);

/// FNV-1a over the canonical (sorted-key) JSON dump, as 16 hex digits.
std::string config_hash(const SimulationConfig& config);

}  // namespace fog
