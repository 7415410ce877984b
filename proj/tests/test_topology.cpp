#include <doctest.h>

#include <algorithm>
#include <random>

#include "fog/topology.hpp"
#include "support.hpp"

using namespace fog;

namespace {

LayerSpec layer(std::size_t nodes, std::size_t cluster, D2DKind kind = D2DKind::none, bool consensus = false,
                double p = 0.0) {
    return LayerSpec{nodes, cluster, D2DModel{kind, p}, consensus};
}

FogTree with_data(FogTree tree, std::size_t per_device) {
    for (const auto leaf : tree.layer_nodes(0)) {
        Dataset d;
        d.owner = leaf;
        d.samples.assign(per_device, Sample{{0.0}, 0, false});
        tree.datasets[leaf] = d;
    }
    return tree;
}

std::size_t leaf_depth(const FogTree& tree, NodeId leaf) {
    std::size_t hops = 0;
    for (auto p = tree.node(leaf).parent; p; p = tree.node(*p).parent) ++hops;
    return hops;
}

}  // namespace

TEST_SUITE("topology") {

TEST_CASE("two-level tree counts") {
    const auto tree = build_tree({layer(4, 2), layer(2, 2), layer(1, 1)}, 1);
    CHECK(tree.nodes.size() == 7);
    for (const auto leaf : tree.layer_nodes(0)) CHECK(leaf_depth(tree, leaf) == 2);
    CHECK(validate_topology(tree).empty());
    CHECK(tree.root() == NodeId{6});
}

TEST_CASE("one cluster of all devices under the root is the star") {
    const auto tree = build_tree({layer(10, 10), layer(1, 1)}, 1);
    CHECK(tree.clusters.size() == 1);
    CHECK(tree.clusters[0].members.size() == 10);
    CHECK(tree.clusters[0].parent == tree.root());
    CHECK(tree.clusters[0].mode == AggregationMode::server_side);
    CHECK(tree.children(tree.root()).size() == 10);
}

TEST_CASE("clusters are contiguous blocks with round-robin parents") {
    const auto tree = build_tree({layer(12, 3), layer(2, 2), layer(1, 1)}, 5);
    REQUIRE(tree.layer_clusters(0).size() == 4);
    for (std::size_t k = 0; k < 4; ++k) {
        const auto& c = tree.clusters[k];
        CHECK(c.members.front() == NodeId{static_cast<std::uint32_t>(3 * k)});
        CHECK(c.parent == NodeId{static_cast<std::uint32_t>(12 + k % 2)});
    }
}

TEST_CASE("too few clusters for the layer above is rejected") {
    CHECK(test::error_code([] { build_tree({layer(4, 4), layer(2, 2), layer(1, 1)}, 1); }) ==
          ErrorCode::invalid_config);
}

TEST_CASE("same seed draws identical graphs") {
    const std::vector<LayerSpec> specs{layer(30, 6, D2DKind::random, true, 0.5), layer(5, 5), layer(1, 1)};
    const auto a = build_tree(specs, 42, {0.4});
    const auto b = build_tree(specs, 42, {0.4});
    for (std::size_t i = 0; i < a.clusters.size(); ++i) {
        CHECK(a.clusters[i].d2d == b.clusters[i].d2d);
        CHECK(a.clusters[i].trust == b.clusters[i].trust);
    }
    CHECK(validate_topology(a).empty());
}

TEST_CASE("random consensus graphs are connected, hopeless ones fail") {
    const auto tree = build_tree({layer(40, 8, D2DKind::random, true, 0.3), layer(5, 5), layer(1, 1)}, 9);
    for (const auto id : tree.layer_clusters(0)) CHECK(tree.clusters[id].d2d.is_connected());
    CHECK(test::error_code([] { draw_d2d_graph({D2DKind::random, 1e-9}, 6, true, 1); }) == ErrorCode::topology);
    CHECK(test::error_code([] { draw_d2d_graph({D2DKind::none, 0}, 3, true, 1); }) == ErrorCode::topology);
}

TEST_CASE("ring and complete graphs") {
    const auto ring = draw_d2d_graph({D2DKind::ring, 0}, 6, true, 1);
    for (std::size_t i = 0; i < 6; ++i) CHECK(ring.degree(i) == 2);
    const auto k5 = draw_d2d_graph({D2DKind::complete, 0}, 5, true, 1);
    CHECK(k5.edge_count() == 10);
    CHECK_FALSE(k5.has_self_loops());
}

TEST_CASE("validate_topology reports constructed violations") {
    auto tree = build_tree({layer(8, 4, D2DKind::ring, true), layer(2, 2), layer(1, 1)}, 3);
    REQUIRE(validate_topology(tree).empty());

    SUBCASE("a disconnected consensus cluster is named") {
        auto& c = tree.clusters[1];
        c.d2d.connect(0, 1, false);
        c.d2d.connect(2, 3, false);
        const auto v = validate_topology(tree);
        REQUIRE(v.size() == 1);
        CHECK(v[0].find("cluster 1") != std::string::npos);
    }
    SUBCASE("two roots") {
        tree.nodes[NodeId{9}].parent.reset();
        tree.nodes[NodeId{9}].cluster.reset();
        const auto v = validate_topology(tree);
        CHECK(std::find(v.begin(), v.end(), "multiple roots") != v.end());
    }
    SUBCASE("every violation is reported") {
        tree.clusters[0].d2d.set(0, 1, false);  // asymmetric
        tree.clusters[1].d2d.set(2, 2, true);   // self loop
        CHECK(validate_topology(tree).size() >= 2);
    }
}

TEST_CASE("migration moves one device between same-layer clusters") {
    auto tree = with_data(build_tree({layer(8, 4, D2DKind::complete, true), layer(2, 2), layer(1, 1)}, 1), 10);
    const MobilityEvent ev{1, MobilityKind::migrate, NodeId{3}, 1, std::nullopt};
    tree = apply_mobility_event(std::move(tree), ev, 7);
    CHECK(tree.clusters[0].members.size() == 3);
    CHECK(tree.clusters[1].members.size() == 5);
    CHECK(tree.layer_nodes(0).size() == 8);
    CHECK(tree.node(NodeId{3}).parent == tree.clusters[1].parent);
    CHECK(tree.clusters[1].d2d.order() == 5);
    CHECK(validate_topology(tree).empty());
    CHECK(tree.total_samples() == 80);
}

TEST_CASE("mobility errors") {
    auto tree = with_data(build_tree({layer(8, 4), layer(2, 2), layer(1, 1)}, 1), 10);
    // Cluster 2 is the layer-1 cluster.
    CHECK(test::error_code([&] { apply_mobility_event(tree, {1, MobilityKind::migrate, NodeId{0}, 2, {}}, 1); }) ==
          ErrorCode::cross_layer_migration);
    CHECK(test::error_code([&] { apply_mobility_event(tree, {1, MobilityKind::migrate, NodeId{77}, 1, {}}, 1); }) ==
          ErrorCode::unknown_node);
}

TEST_CASE("departure hands data over or loses it") {
    auto tree = with_data(build_tree({layer(8, 4), layer(2, 2), layer(1, 1)}, 1), 10);
    tree = apply_mobility_event(std::move(tree), {1, MobilityKind::depart, NodeId{2}, 0, NodeId{1}}, 3);
    CHECK(tree.datasets.at(NodeId{1}).size() == 20);
    CHECK(tree.total_samples() == 80);
    CHECK_FALSE(tree.contains(NodeId{2}));

    tree = apply_mobility_event(std::move(tree), {2, MobilityKind::depart, NodeId{5}, 0, std::nullopt}, 3);
    CHECK(tree.total_samples() == 70);
    CHECK(validate_topology(tree).empty());
}

TEST_CASE("random event sequences keep the tree valid and conserve samples") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        auto tree = with_data(
            build_tree({layer(24, 4, D2DKind::random, true, 0.6), layer(3, 2), layer(1, 1)}, rng()), 10);
        std::size_t expected = tree.total_samples();
        const MobilityRates rates{3.0, 0.4, 0.5};
        for (int round = 1; round <= 10; ++round) {
            for (const auto& ev : generate_mobility_events(tree, rates, round, rng())) {
                if (ev.kind == MobilityKind::depart && !ev.handover_peer) expected -= tree.datasets.at(ev.node).size();
                tree = apply_mobility_event(std::move(tree), ev, 5);
            }
            const auto v = validate_topology(tree);
            CHECK(v.empty());
            CHECK(tree.total_samples() == expected);
            for (const auto leaf : tree.layer_nodes(0)) CHECK(leaf_depth(tree, leaf) == 2);
        }
    }
}

TEST_CASE("event generation is reproducible") {
    const auto tree = with_data(build_tree({layer(24, 4), layer(3, 2), layer(1, 1)}, 2), 5);
    const MobilityRates rates{4.0, 0.5, 0.5};
    const auto a = generate_mobility_events(tree, rates, 3, 11);
    const auto b = generate_mobility_events(tree, rates, 3, 11);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].node == b[i].node);
        CHECK(a[i].destination_cluster == b[i].destination_cluster);
        CHECK(a[i].handover_peer == b[i].handover_peer);
    }
}

}  // TEST_SUITE
