#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "fog/model.hpp"
#include "fog/netmodel.hpp"
#include "fog/topology.hpp"

namespace fog {

/// sum_i w_i v_i / sum_i w_i. Errors: empty_input, length_mismatch,
/// negative_weight, zero_weight_sum.
ParameterVector weighted_average(std::span<const ParameterVector> vectors, std::span<const double> weights);

/// Symmetric doubly stochastic neighbor-weight matrix over a cluster.
class MixingMatrix {
public:
    MixingMatrix() = default;
    explicit MixingMatrix(std::size_t order) : order_(order), w_(order * order, 0.0) {}

    [[nodiscard]] std::size_t order() const noexcept { return order_; }
    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const { return w_[i * order_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return w_[i * order_ + j]; }

private:
    std::size_t order_ = 0;
    std::vector<double> w_;
};

/// Lazy Metropolis–Hastings weights: m_ij = 1 / (1 + max(deg_i, deg_j)) on
/// edges, m_ii = 1 - sum_j m_ij, then (M + I) / 2. The lazy step keeps every
/// eigenvalue in [0, 1], so disagreement never grows from one round to the next.
MixingMatrix build_mixing_matrix(const Adjacency& adjacency);

/// state'_i = sum_j M_ij state_j.
std::vector<ParameterVector> consensus_round(std::span<const ParameterVector> states, const MixingMatrix& matrix);

struct ConsensusResult {
    std::vector<ParameterVector> states;
    std::uint64_t message_count = 0;  // rounds * 2 * edges
};

/// `rounds` consensus rounds over the cluster's D2D graph. With sigma > 0
/// every received neighbor message carries fresh N(0, sigma^2) noise per
/// coordinate before it is mixed in.
ConsensusResult consensus_aggregate(const Cluster& cluster, std::span<const ParameterVector> states, int rounds,
                                    double noise_sigma, std::uint64_t seed);

/// Member with the most residual energy; lowest id on ties. Members missing
/// from the map count as zero.
NodeId select_uploader(const Cluster& cluster, const std::map<NodeId, double>& residual_energy);

struct CompressionConfig {
    std::optional<int> quantize_bits;
    std::optional<std::size_t> topk;

    [[nodiscard]] bool active() const noexcept { return quantize_bits.has_value() || topk.has_value(); }
};

struct CompressionResult {
    ParameterVector vector;
    std::uint64_t transmitted = 0;
};

/// Top-k by magnitude (lowest index on ties), then uniform quantization of the
/// kept entries to 2^bits bins over their [min, max], reconstructed at bin centers.
CompressionResult compress(const ParameterVector& vector, const CompressionConfig& cfg);

// ---------------------------------------------------------------- cluster pass

struct Contribution {
    ParameterVector params;
    double weight = 0.0;  // samples represented
};

struct ClusterPolicy {
    int consensus_rounds = 1;
    double d2d_noise = 0.0;
    double uplink_noise = 0.0;
    CompressionConfig compression;
    // Uplinks carry compress(x - reference); the parent adds the reference back.
    const ParameterVector* reference = nullptr;
};

/// A group of members that reach the parent through one upload: a single
/// member under server-side aggregation, or a connected D2D component.
struct UploadGroup {
    std::vector<NodeId> members;
    NodeId uploader{};
    std::size_t max_degree = 0;  // inside the group's D2D graph
    std::uint64_t uplink_params = 0;
    double weight = 0.0;
    ParameterVector received;  // what the parent reconstructs
};

struct ClusterAggregate {
    ParameterVector value;  // weighted average of everything the parent received
    double weight = 0.0;
    std::vector<UploadGroup> groups;
    std::vector<ClusterTransfer> transfers;
    // Relative distance between uploaded consensus states and the exact
    // weighted member mean, summed over consensus groups of size > 1.
    double consensus_error_sum = 0.0;
    std::size_t consensus_groups = 0;
};

/// Aggregates one cluster's contributing members into its parent. Members
/// absent from `contributions` do not take part; in consensus mode the
/// contributors' induced D2D subgraph is split into connected components,
/// each converging to its own weighted mean and electing one uploader.
ClusterAggregate aggregate_cluster(const Cluster& cluster, const std::map<NodeId, Contribution>& contributions,
                                   const ClusterPolicy& policy, const std::map<NodeId, double>& residual_energy,
                                   std::uint64_t seed);

struct HierarchyOptions {
    ClusterPolicy policy;
    std::map<NodeId, double> residual_energy;
    CostModel costs;
    std::uint64_t seed = 0;
    int round = 0;
};

struct HierarchyResult {
    ParameterVector root;
    Ledgers ledger;
    std::vector<Event> events;
};

/// Full bottom-up pass of every leaf through every layer to the root.
HierarchyResult hierarchical_aggregate(const FogTree& tree, const std::map<NodeId, ParameterVector>& leaf_params,
                                       const std::map<NodeId, double>& leaf_weights, const HierarchyOptions& options);

}  // namespace fog
