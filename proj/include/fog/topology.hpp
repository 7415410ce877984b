#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fog/model.hpp"
#include "fog/netmodel.hpp"
#include "fog/types.hpp"

namespace fog {

/// Square symmetric boolean matrix over a cluster's member positions.
class Adjacency {
public:
    Adjacency() = default;
    explicit Adjacency(std::size_t order) : order_(order), bits_(order * order, 0) {}

    [[nodiscard]] std::size_t order() const noexcept { return order_; }
    [[nodiscard]] bool operator()(std::size_t i, std::size_t j) const { return bits_[i * order_ + j] != 0; }

    // Sets the single entry (i, j); use connect() to keep the matrix symmetric.
    void set(std::size_t i, std::size_t j, bool value) { bits_[i * order_ + j] = value ? 1 : 0; }
    void connect(std::size_t i, std::size_t j, bool value = true) {
        set(i, j, value);
        set(j, i, value);
    }

    [[nodiscard]] std::size_t degree(std::size_t i) const;
    [[nodiscard]] std::size_t edge_count() const;  // undirected edges
    [[nodiscard]] bool is_symmetric() const;
    [[nodiscard]] bool has_self_loops() const;
    [[nodiscard]] bool is_connected() const;

    /// Sub-matrix over the given positions, in the given order.
    [[nodiscard]] Adjacency induced(const std::vector<std::size_t>& positions) const;

    /// Connected components as sorted position lists, ordered by smallest member.
    [[nodiscard]] std::vector<std::vector<std::size_t>> components() const;

    bool operator==(const Adjacency&) const = default;

private:
    std::size_t order_ = 0;
    std::vector<std::uint8_t> bits_;
};

enum class D2DKind { none, complete, random, ring };

struct D2DModel {
    D2DKind kind = D2DKind::none;
    double edge_probability = 0.0;  // random only
};

enum class AggregationMode { server_side, d2d_consensus };

struct LayerSpec {
    std::size_t node_count = 1;
    std::size_t cluster_size = 1;
    D2DModel d2d{};
    bool d2d_enabled = false;  // clusters of this layer run consensus aggregation
};

struct Cluster {
    ClusterId id = 0;
    std::size_t layer = 0;
    std::vector<NodeId> members;  // sorted ascending; matrix positions follow this order
    NodeId parent{};
    D2DModel d2d_model{};
    Adjacency d2d;
    Adjacency trust;  // leaf clusters only; empty otherwise
    AggregationMode mode = AggregationMode::server_side;

    [[nodiscard]] std::optional<std::size_t> position(NodeId node) const;
};

struct TreeNode {
    NodeId id{};
    std::size_t layer = 0;
    std::optional<NodeId> parent;
    std::optional<ClusterId> cluster;  // nullopt for the root
};

/// Rooted multi-layer tree. Layer 0 holds the devices, the last layer holds
/// the single root. Fields are public so callers (and tests) can inspect and
/// perturb a tree; validate_topology() reports any broken invariant.
struct FogTree {
    std::vector<LayerSpec> layers;
    std::map<NodeId, TreeNode> nodes;
    std::vector<Cluster> clusters;
    std::map<NodeId, Dataset> datasets;             // leaves only
    std::map<NodeId, ComputeProfile> compute;       // leaves only
    double trust_density = 1.0;

    [[nodiscard]] std::size_t layer_count() const noexcept { return layers.size(); }
    [[nodiscard]] std::size_t root_layer() const noexcept { return layers.size() - 1; }
    [[nodiscard]] NodeId root() const;
    [[nodiscard]] std::vector<NodeId> layer_nodes(std::size_t layer) const;
    [[nodiscard]] std::vector<ClusterId> layer_clusters(std::size_t layer) const;
    [[nodiscard]] std::vector<ClusterId> clusters_of_parent(NodeId parent) const;
    [[nodiscard]] std::vector<NodeId> children(NodeId parent) const;
    [[nodiscard]] std::vector<NodeId> leaves_under(NodeId node) const;
    [[nodiscard]] const TreeNode& node(NodeId id) const;
    [[nodiscard]] bool contains(NodeId id) const { return nodes.contains(id); }
    [[nodiscard]] std::size_t total_samples() const;
};

struct TreeOptions {
    double trust_density = 1.0;  // Erdős–Rényi edge probability of the leaf trust overlay
};

/// Builds the tree: contiguous id blocks form clusters, cluster parents are
/// assigned round-robin within the layer above, D2D graphs drawn from `seed`.
FogTree build_tree(const std::vector<LayerSpec>& layer_specs, std::uint64_t seed, TreeOptions options = {});

/// Every broken invariant, not just the first. Empty means valid.
std::vector<std::string> validate_topology(const FogTree& tree);

/// Draws a D2D graph over `order` members. Consensus clusters are redrawn up
/// to 100 times until connected, after which a topology error is raised.
Adjacency draw_d2d_graph(const D2DModel& model, std::size_t order, bool require_connected, std::uint64_t seed);

Adjacency draw_trust_graph(std::size_t order, double density, std::uint64_t seed);

enum class MobilityKind { migrate, depart };

struct MobilityEvent {
    int round = 0;
    MobilityKind kind = MobilityKind::migrate;
    NodeId node{};
    ClusterId destination_cluster = 0;   // migrate only
    std::optional<NodeId> handover_peer;  // depart only
};

/// Applies one event between rounds. A migrating node moves (with its dataset)
/// to a cluster of the same layer; a departing leaf hands its dataset to
/// `handover_peer` if given, otherwise the samples are lost. The D2D graphs of
/// affected clusters are redrawn from `seed`.
FogTree apply_mobility_event(FogTree tree, const MobilityEvent& event, std::uint64_t seed);

struct MobilityRates {
    double events_per_round = 0.0;     // Poisson mean
    double depart_probability = 0.0;   // otherwise migrate
    double handover_probability = 1.0;  // departures that hand data to a cluster peer
};

/// Seeded exogenous event stream for one round. Events that would empty a
/// cluster are not generated.
std::vector<MobilityEvent> generate_mobility_events(const FogTree& tree, const MobilityRates& rates, int round,
                                                    std::uint64_t seed);

}  // namespace fog
