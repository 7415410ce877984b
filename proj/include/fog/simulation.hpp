#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fog/config.hpp"
#include "fog/model.hpp"
#include "fog/netmodel.hpp"
#include "fog/topology.hpp"

namespace fog {

/// One output record per global round. Traffic, energy and counters are the
/// amounts incurred during that round.
struct MetricsRow {
    int round = 0;
    double global_loss = 0.0;
    double global_accuracy = 0.0;
    std::uint64_t uplink_params = 0;
    std::uint64_t downlink_params = 0;
    std::uint64_t d2d_params = 0;
    double total_energy_j = 0.0;
    double round_delay_s = 0.0;
    std::uint64_t stragglers_dropped = 0;
    std::uint64_t clusters_sampled = 0;
    std::uint64_t samples_moved = 0;

    bool operator==(const MetricsRow&) const = default;
};

/// A subtree whose head transmits upstream every `vertical_period` rounds and
/// runs `intra_rounds` cycles of local update + in-block aggregation per round.
struct LearningBlock {
    std::size_t id = 0;
    NodeId head{};
    int vertical_period = 1;
    int intra_rounds = 1;
};

enum class BlockAction { intra_only, intra_and_vertical };

/// Picks k = max(1, round(fraction * count)) clusters uniformly without
/// replacement; the draw depends only on (seed, round). Result is sorted.
std::vector<ClusterId> sample_clusters(std::span<const ClusterId> leaf_clusters, double fraction, std::uint64_t seed,
                                       int round);

/// A block goes vertical iff round mod vertical_period == 0.
std::vector<BlockAction> schedule_round(std::span<const LearningBlock> blocks, int round);

/// One block per node of the configured head layer (capped at the root).
std::vector<LearningBlock> default_blocks(const FogTree& tree, const SimulationConfig& config);

struct SimulationResult {
    std::vector<MetricsRow> rows;
    ParameterVector final_params;
    std::vector<Event> events;
    Ledgers ledger;
    // Mean relative consensus error of the round's consensus uploads (0 when none).
    std::vector<double> consensus_error;
    std::size_t device_count = 0;
};

/// Devices of the fog tree, data and compute profiles for a config; shared
/// by the fog run and both baselines so they see identical data.
struct Scenario {
    FogTree tree;
    Partition partition;
};

Scenario build_scenario(const SimulationConfig& config);

/// Per global round: mobility, cluster sampling, cache/offload phases, local
/// updates, straggler policy, cluster aggregation, vertical propagation and
/// broadcast for blocks that are due, evaluation. Deterministic under seed.
SimulationResult run_simulation(const SimulationConfig& config);

/// The config rewritten as a plain star: every device uplinks to the root each round.
SimulationConfig star_config(const SimulationConfig& config);

/// Full-batch gradient descent on the pooled device data, one row per round.
SimulationResult run_centralized(const SimulationConfig& config);

struct BaselineResults {
    SimulationResult star;
    SimulationResult centralized;
};

BaselineResults run_baselines(const SimulationConfig& config);

}  // namespace fog
