#include "fog/topology.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

#include "fog/error.hpp"

namespace fog {

// ---------------------------------------------------------------- Adjacency

std::size_t Adjacency::degree(std::size_t i) const {
    std::size_t d = 0;
    for (std::size_t j = 0; j < order_; ++j)
        if (j != i && (*this)(i, j)) ++d;
    return d;
}

std::size_t Adjacency::edge_count() const {
    std::size_t e = 0;
    for (std::size_t i = 0; i < order_; ++i)
        for (std::size_t j = i + 1; j < order_; ++j)
            if ((*this)(i, j)) ++e;
    return e;
}

bool Adjacency::is_symmetric() const {
    for (std::size_t i = 0; i < order_; ++i)
        for (std::size_t j = i + 1; j < order_; ++j)
            if ((*this)(i, j) != (*this)(j, i)) return false;
    return true;
}

bool Adjacency::has_self_loops() const {
    for (std::size_t i = 0; i < order_; ++i)
        if ((*this)(i, i)) return true;
    return false;
}

bool Adjacency::is_connected() const { return components().size() <= 1; }

Adjacency Adjacency::induced(const std::vector<std::size_t>& positions) const {
    Adjacency out(positions.size());
    for (std::size_t a = 0; a < positions.size(); ++a)
        for (std::size_t b = 0; b < positions.size(); ++b) out.set(a, b, (*this)(positions[a], positions[b]));
    return out;
}

std::vector<std::vector<std::size_t>> Adjacency::components() const {
    std::vector<std::vector<std::size_t>> out;
    std::vector<bool> seen(order_, false);
    for (std::size_t start = 0; start < order_; ++start) {
        if (seen[start]) continue;
        std::vector<std::size_t> component{start};
        seen[start] = true;
        for (std::size_t k = 0; k < component.size(); ++k) {
            for (std::size_t j = 0; j < order_; ++j) {
                if (!seen[j] && j != component[k] && (*this)(component[k], j)) {
                    seen[j] = true;
                    component.push_back(j);
                }
            }
        }
        std::sort(component.begin(), component.end());
        out.push_back(std::move(component));
    }
    return out;
}

// ---------------------------------------------------------------- FogTree

std::optional<std::size_t> Cluster::position(NodeId node) const {
    const auto it = std::lower_bound(members.begin(), members.end(), node);
    if (it == members.end() || *it != node) return std::nullopt;
    return static_cast<std::size_t>(it - members.begin());
}

NodeId FogTree::root() const {
    for (const auto& [id, n] : nodes)
        if (!n.parent) return id;
    throw Error(ErrorCode::topology, "tree has no root");
}

std::vector<NodeId> FogTree::layer_nodes(std::size_t layer) const {
    std::vector<NodeId> out;
    for (const auto& [id, n] : nodes)
        if (n.layer == layer) out.push_back(id);
    return out;
}

std::vector<ClusterId> FogTree::layer_clusters(std::size_t layer) const {
    std::vector<ClusterId> out;
    for (const auto& c : clusters)
        if (c.layer == layer) out.push_back(c.id);
    return out;
}

std::vector<ClusterId> FogTree::clusters_of_parent(NodeId parent) const {
    std::vector<ClusterId> out;
    for (const auto& c : clusters)
        if (c.parent == parent && !c.members.empty()) out.push_back(c.id);
    return out;
}

std::vector<NodeId> FogTree::children(NodeId parent) const {
    std::vector<NodeId> out;
    for (const auto& [id, n] : nodes)
        if (n.parent == parent) out.push_back(id);
    return out;
}

std::vector<NodeId> FogTree::leaves_under(NodeId node) const {
    const auto& start = this->node(node);
    if (start.layer == 0) return {node};
    std::vector<NodeId> out;
    for (const auto& [id, n] : nodes) {
        if (n.layer != 0) continue;
        auto cursor = n.parent;
        while (cursor && *cursor != node) cursor = this->node(*cursor).parent;
        if (cursor) out.push_back(id);
    }
    return out;
}

const TreeNode& FogTree::node(NodeId id) const {
    const auto it = nodes.find(id);
    if (it == nodes.end()) throw Error(ErrorCode::unknown_node, fmt::format("unknown node {}", id.value));
    return it->second;
}

std::size_t FogTree::total_samples() const {
    std::size_t total = 0;
    for (const auto& [id, d] : datasets) total += d.size();
    return total;
}

// ---------------------------------------------------------------- graphs

Adjacency draw_d2d_graph(const D2DModel& model, std::size_t order, bool require_connected, std::uint64_t seed) {
    Adjacency g(order);
    switch (model.kind) {
        case D2DKind::none:
            break;
        case D2DKind::complete:
            for (std::size_t i = 0; i < order; ++i)
                for (std::size_t j = i + 1; j < order; ++j) g.connect(i, j);
            break;
        case D2DKind::ring:
            for (std::size_t i = 0; order > 1 && i < order; ++i)
                if (i != (i + 1) % order) g.connect(i, (i + 1) % order);
            break;
        case D2DKind::random: {
            std::mt19937_64 rng(seed);
            std::bernoulli_distribution edge(std::clamp(model.edge_probability, 0.0, 1.0));
            for (int attempt = 0; attempt <= 100; ++attempt) {
                g = Adjacency(order);
                for (std::size_t i = 0; i < order; ++i)
                    for (std::size_t j = i + 1; j < order; ++j)
                        if (edge(rng)) g.connect(i, j);
                if (!require_connected || g.is_connected()) return g;
            }
            throw Error(ErrorCode::topology,
                        fmt::format("random D2D graph over {} members stayed disconnected after 100 redraws", order));
        }
    }
    if (require_connected && !g.is_connected())
        throw Error(ErrorCode::topology, fmt::format("D2D model cannot connect a consensus cluster of {} members", order));
    return g;
}

Adjacency draw_trust_graph(std::size_t order, double density, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution edge(std::clamp(density, 0.0, 1.0));
    Adjacency g(order);
    for (std::size_t i = 0; i < order; ++i)
        for (std::size_t j = i + 1; j < order; ++j)
            if (edge(rng)) g.connect(i, j);
    return g;
}

namespace {

void redraw_graphs(FogTree& tree, Cluster& cluster, std::uint64_t seed) {
    const bool consensus = cluster.mode == AggregationMode::d2d_consensus;
    cluster.d2d = draw_d2d_graph(cluster.d2d_model, cluster.members.size(), consensus, derive_seed(seed, 1, cluster.id));
    if (cluster.layer == 0)
        cluster.trust = draw_trust_graph(cluster.members.size(), tree.trust_density, derive_seed(seed, 2, cluster.id));
}

}  // namespace

FogTree build_tree(const std::vector<LayerSpec>& layer_specs, std::uint64_t seed, TreeOptions options) {
    if (layer_specs.size() < 2) throw Error(ErrorCode::invalid_config, "a fog tree needs at least two layers");
    if (layer_specs.back().node_count != 1) throw Error(ErrorCode::invalid_config, "top layer must hold exactly one root");
    for (std::size_t l = 0; l + 1 < layer_specs.size(); ++l) {
        const auto& spec = layer_specs[l];
        if (spec.node_count == 0 || spec.cluster_size == 0)
            throw Error(ErrorCode::invalid_config, fmt::format("layer {} needs positive node_count and cluster_size", l));
        const auto cluster_count = (spec.node_count + spec.cluster_size - 1) / spec.cluster_size;
        if (cluster_count < layer_specs[l + 1].node_count)
            throw Error(ErrorCode::invalid_config,
                        fmt::format("layer {} forms {} clusters, fewer than the {} nodes above it", l, cluster_count,
                                    layer_specs[l + 1].node_count));
    }

    FogTree tree;
    tree.layers = layer_specs;
    tree.trust_density = options.trust_density;

    std::vector<std::uint32_t> offset(layer_specs.size() + 1, 0);
    for (std::size_t l = 0; l < layer_specs.size(); ++l)
        offset[l + 1] = offset[l] + static_cast<std::uint32_t>(layer_specs[l].node_count);

    for (std::size_t l = 0; l < layer_specs.size(); ++l)
        for (std::uint32_t k = 0; k < layer_specs[l].node_count; ++k) {
            const NodeId id{offset[l] + k};
            tree.nodes[id] = TreeNode{id, l, std::nullopt, std::nullopt};
        }

    for (std::size_t l = 0; l + 1 < layer_specs.size(); ++l) {
        const auto& spec = layer_specs[l];
        const auto upper = static_cast<std::uint32_t>(layer_specs[l + 1].node_count);
        std::uint32_t index_in_layer = 0;
        for (std::uint32_t begin = 0; begin < spec.node_count; begin += static_cast<std::uint32_t>(spec.cluster_size)) {
            const auto end = std::min<std::uint32_t>(begin + static_cast<std::uint32_t>(spec.cluster_size),
                                                     static_cast<std::uint32_t>(spec.node_count));
            Cluster c;
            c.id = tree.clusters.size();
            c.layer = l;
            c.parent = NodeId{offset[l + 1] + index_in_layer % upper};
            c.d2d_model = spec.d2d;
            c.mode = spec.d2d_enabled ? AggregationMode::d2d_consensus : AggregationMode::server_side;
            for (auto k = begin; k < end; ++k) {
                const NodeId member{offset[l] + k};
                c.members.push_back(member);
                tree.nodes[member].parent = c.parent;
                tree.nodes[member].cluster = c.id;
            }
            tree.clusters.push_back(std::move(c));
            ++index_in_layer;
        }
    }
    for (auto& c : tree.clusters) redraw_graphs(tree, c, seed);
    return tree;
}

std::vector<std::string> validate_topology(const FogTree& tree) {
    std::vector<std::string> v;
    const auto layer_count = tree.layers.size();
    if (layer_count < 2) v.emplace_back("tree has fewer than two layers");

    std::size_t roots = 0;
    for (const auto& [id, n] : tree.nodes)
        if (!n.parent) ++roots;
    if (roots == 0) v.emplace_back("no root");
    if (roots > 1) v.emplace_back("multiple roots");

    std::set<NodeId> has_children;
    for (const auto& [id, n] : tree.nodes) {
        if (n.id != id) v.push_back(fmt::format("node {} stored under id {}", n.id.value, id.value));
        if (!n.parent) {
            if (layer_count > 0 && n.layer != layer_count - 1)
                v.push_back(fmt::format("node {} has no parent but sits in layer {}", id.value, n.layer));
            continue;
        }
        has_children.insert(*n.parent);
        const auto p = tree.nodes.find(*n.parent);
        if (p == tree.nodes.end()) {
            v.push_back(fmt::format("node {} has unknown parent {}", id.value, n.parent->value));
        } else if (p->second.layer != n.layer + 1) {
            v.push_back(fmt::format("node {} (layer {}) has parent {} in layer {}", id.value, n.layer,
                                    n.parent->value, p->second.layer));
        }
    }

    for (const auto& [id, n] : tree.nodes) {
        if (n.layer > 0 && n.parent && !has_children.contains(id))
            v.push_back(fmt::format("internal node {} has no children", id.value));
        if (n.layer != 0) continue;
        std::size_t hops = 0;
        auto cursor = n.parent;
        while (cursor && hops <= tree.nodes.size()) {
            ++hops;
            const auto p = tree.nodes.find(*cursor);
            cursor = p == tree.nodes.end() ? std::nullopt : p->second.parent;
        }
        if (layer_count > 0 && hops != layer_count - 1)
            v.push_back(fmt::format("leaf {} is {} hops from the root, expected {}", id.value, hops, layer_count - 1));
    }

    std::map<NodeId, std::size_t> membership;
    for (std::size_t ci = 0; ci < tree.clusters.size(); ++ci) {
        const auto& c = tree.clusters[ci];
        const auto name = fmt::format("cluster {}", c.id);
        if (c.id != ci) v.push_back(fmt::format("{} stored at index {}", name, ci));
        if (!std::is_sorted(c.members.begin(), c.members.end()) ||
            std::adjacent_find(c.members.begin(), c.members.end()) != c.members.end())
            v.push_back(fmt::format("{}: members not sorted and unique", name));
        for (const auto member : c.members) {
            ++membership[member];
            const auto it = tree.nodes.find(member);
            if (it == tree.nodes.end()) {
                v.push_back(fmt::format("{}: unknown member {}", name, member.value));
                continue;
            }
            if (it->second.layer != c.layer)
                v.push_back(fmt::format("{}: member {} is in layer {}, cluster is layer {}", name, member.value,
                                        it->second.layer, c.layer));
            if (it->second.parent != c.parent)
                v.push_back(fmt::format("{}: member {} has a different parent than the cluster", name, member.value));
            if (it->second.cluster != c.id)
                v.push_back(fmt::format("{}: member {} points at another cluster", name, member.value));
        }
        if (c.d2d.order() != c.members.size()) {
            v.push_back(fmt::format("{}: D2D matrix order {} != member count {}", name, c.d2d.order(), c.members.size()));
        } else {
            if (!c.d2d.is_symmetric()) v.push_back(fmt::format("{}: D2D adjacency not symmetric", name));
            if (c.d2d.has_self_loops()) v.push_back(fmt::format("{}: D2D adjacency has a nonzero diagonal", name));
            if (c.mode == AggregationMode::d2d_consensus && !c.d2d.is_connected())
                v.push_back(fmt::format("{}: consensus cluster has a disconnected D2D graph", name));
        }
        if (c.layer == 0) {
            if (c.trust.order() != c.members.size())
                v.push_back(fmt::format("{}: trust matrix order {} != member count {}", name, c.trust.order(),
                                        c.members.size()));
            else if (!c.trust.is_symmetric() || c.trust.has_self_loops())
                v.push_back(fmt::format("{}: trust adjacency not symmetric with zero diagonal", name));
        } else if (c.trust.order() != 0) {
            v.push_back(fmt::format("{}: trust graph on a non-leaf cluster", name));
        }
    }

    for (const auto& [id, n] : tree.nodes) {
        if (!n.parent) continue;
        const auto count = membership.contains(id) ? membership.at(id) : 0;
        if (count != 1) v.push_back(fmt::format("node {} belongs to {} clusters", id.value, count));
    }
    return v;
}

// ---------------------------------------------------------------- mobility

namespace {

Cluster& cluster_of(FogTree& tree, NodeId node) {
    const auto& n = tree.node(node);
    if (!n.cluster) throw Error(ErrorCode::invalid_argument, fmt::format("node {} is the root", node.value));
    return tree.clusters.at(*n.cluster);
}

void remove_member(Cluster& c, NodeId node) {
    c.members.erase(std::remove(c.members.begin(), c.members.end(), node), c.members.end());
}

}  // namespace

FogTree apply_mobility_event(FogTree tree, const MobilityEvent& event, std::uint64_t seed) {
    if (!tree.contains(event.node))
        throw Error(ErrorCode::unknown_node, fmt::format("mobility event names unknown node {}", event.node.value));
    Cluster& source = cluster_of(tree, event.node);
    const auto event_seed = derive_seed(seed, static_cast<std::uint64_t>(event.round), event.node.value);

    if (event.kind == MobilityKind::migrate) {
        if (event.destination_cluster >= tree.clusters.size())
            throw Error(ErrorCode::invalid_argument, fmt::format("unknown destination cluster {}", event.destination_cluster));
        Cluster& dest = tree.clusters[event.destination_cluster];
        if (dest.layer != source.layer)
            throw Error(ErrorCode::cross_layer_migration,
                        fmt::format("node {} cannot migrate from layer {} to layer {}", event.node.value, source.layer,
                                    dest.layer));
        if (dest.id == source.id) return tree;
        if (source.members.size() == 1)
            throw Error(ErrorCode::topology, fmt::format("migrating node {} would empty cluster {}", event.node.value, source.id));
        remove_member(source, event.node);
        dest.members.insert(std::lower_bound(dest.members.begin(), dest.members.end(), event.node), event.node);
        auto& n = tree.nodes.at(event.node);
        n.parent = dest.parent;
        n.cluster = dest.id;
        redraw_graphs(tree, source, event_seed);
        redraw_graphs(tree, dest, event_seed);
        return tree;
    }

    if (tree.node(event.node).layer != 0)
        throw Error(ErrorCode::invalid_argument, fmt::format("only leaf devices can depart (node {})", event.node.value));
    if (source.members.size() == 1)
        throw Error(ErrorCode::topology, fmt::format("departure of node {} would empty cluster {}", event.node.value, source.id));
    if (event.handover_peer) {
        const auto peer = *event.handover_peer;
        if (!tree.contains(peer)) throw Error(ErrorCode::unknown_node, fmt::format("unknown handover peer {}", peer.value));
        if (peer == event.node || tree.node(peer).layer != 0)
            throw Error(ErrorCode::invalid_argument, fmt::format("invalid handover peer {}", peer.value));
        auto& from = tree.datasets[event.node].samples;
        auto& to = tree.datasets[peer].samples;
        to.insert(to.end(), std::make_move_iterator(from.begin()), std::make_move_iterator(from.end()));
    }
    remove_member(source, event.node);
    tree.nodes.erase(event.node);
    tree.datasets.erase(event.node);
    tree.compute.erase(event.node);
    redraw_graphs(tree, source, event_seed);
    return tree;
}

std::vector<MobilityEvent> generate_mobility_events(const FogTree& tree, const MobilityRates& rates, int round,
                                                    std::uint64_t seed) {
    std::vector<MobilityEvent> events;
    if (rates.events_per_round <= 0.0) return events;
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(round)));
    const auto count = std::poisson_distribution<int>(rates.events_per_round)(rng);

    // Working copy of leaf membership so that a batch of events stays valid
    // when applied in order.
    std::map<ClusterId, std::vector<NodeId>> members;
    for (const auto id : tree.layer_clusters(0)) members[id] = tree.clusters[id].members;

    std::bernoulli_distribution depart(std::clamp(rates.depart_probability, 0.0, 1.0));
    std::bernoulli_distribution handover(std::clamp(rates.handover_probability, 0.0, 1.0));
    for (int e = 0; e < count; ++e) {
        std::vector<std::pair<NodeId, ClusterId>> movable;
        for (const auto& [cid, m] : members)
            if (m.size() > 1)
                for (const auto node : m) movable.emplace_back(node, cid);
        if (movable.empty()) break;
        const auto [node, source] = movable[std::uniform_int_distribution<std::size_t>(0, movable.size() - 1)(rng)];
        auto& src = members[source];

        MobilityEvent ev;
        ev.round = round;
        ev.node = node;
        if (depart(rng)) {
            ev.kind = MobilityKind::depart;
            if (handover(rng)) {
                std::vector<NodeId> peers;
                std::copy_if(src.begin(), src.end(), std::back_inserter(peers), [&](NodeId p) { return p != node; });
                ev.handover_peer = peers[std::uniform_int_distribution<std::size_t>(0, peers.size() - 1)(rng)];
            }
            src.erase(std::find(src.begin(), src.end(), node));
        } else {
            std::vector<ClusterId> destinations;
            for (const auto& [cid, m] : members)
                if (cid != source) destinations.push_back(cid);
            if (destinations.empty()) continue;
            ev.kind = MobilityKind::migrate;
            ev.destination_cluster =
                destinations[std::uniform_int_distribution<std::size_t>(0, destinations.size() - 1)(rng)];
            src.erase(std::find(src.begin(), src.end(), node));
            auto& dst = members[ev.destination_cluster];
            dst.insert(std::lower_bound(dst.begin(), dst.end(), node), node);
        }
        events.push_back(ev);
    }
    return events;
}

}  // namespace fog
