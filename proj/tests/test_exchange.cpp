#include <doctest.h>

#include <algorithm>
#include <random>

#include "fog/exchange.hpp"
#include "support.hpp"

using namespace fog;

namespace {

// A leaf cluster of n members with the given trust edges.
Cluster leaf_cluster(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& trust) {
    Cluster c;
    for (std::uint32_t i = 0; i < n; ++i) c.members.push_back(NodeId{i});
    c.d2d = Adjacency(n);
    c.trust = Adjacency(n);
    for (const auto& [a, b] : trust) c.trust.connect(a, b);
    c.parent = NodeId{50};
    return c;
}

Dataset numbered(NodeId owner, std::size_t n, int offset) {
    Dataset d;
    d.owner = owner;
    for (std::size_t i = 0; i < n; ++i) d.samples.push_back({{static_cast<double>(offset + static_cast<int>(i))}, 0, false});
    return d;
}

std::size_t total(const DatasetMap& m) {
    std::size_t n = 0;
    for (const auto& [id, d] : m) n += d.size();
    return n;
}

std::vector<double> keys(const Dataset& d) {
    std::vector<double> k;
    for (const auto& s : d.samples) k.push_back(s.features[0]);
    std::sort(k.begin(), k.end());
    return k;
}

// Capacity here is samples_per_second * deadline / steps with deadline 1, steps 1.
std::map<NodeId, ComputeProfile> capacities(const std::vector<double>& caps) {
    std::map<NodeId, ComputeProfile> m;
    for (std::uint32_t i = 0; i < caps.size(); ++i) m[NodeId{i}] = ComputeProfile{caps[i], 0.0};
    return m;
}

std::size_t max_overload(const Cluster& c, const DatasetMap& data, const std::map<NodeId, ComputeProfile>& compute) {
    std::size_t worst = 0;
    for (const auto n : c.members) {
        const auto cap = processing_capacity(compute.at(n), 1.0, 1);
        const auto load = data.at(n).size();
        worst = std::max(worst, load > cap ? load - cap : 0);
    }
    return worst;
}

}  // namespace

TEST_SUITE("exchange") {

TEST_CASE("no overload means an empty plan") {
    const auto c = leaf_cluster(3, {{0, 1}, {1, 2}});
    DatasetMap data{{NodeId{0}, numbered(NodeId{0}, 10, 0)}, {NodeId{1}, numbered(NodeId{1}, 10, 100)},
                    {NodeId{2}, numbered(NodeId{2}, 10, 200)}};
    const auto plan = plan_offload(c, data, capacities({20, 20, 20}), 1.0, 1);
    CHECK(plan.transfers.empty());
    CHECK(plan.unresolved.empty());
    CHECK(execute_offload(data, plan).at(NodeId{1}).size() == 10);
}

TEST_CASE("excess moves to the trusted neighbor, highest indices first") {
    const auto c = leaf_cluster(2, {{0, 1}});
    DatasetMap data{{NodeId{0}, numbered(NodeId{0}, 100, 0)}, {NodeId{1}, numbered(NodeId{1}, 10, 1000)}};
    const auto plan = plan_offload(c, data, capacities({60, 60}), 1.0, 1);
    REQUIRE(plan.transfers.size() == 1);
    CHECK(plan.transfers[0].source == NodeId{0});
    CHECK(plan.transfers[0].destination == NodeId{1});
    CHECK(plan.transfers[0].sample_indices.size() == 40);
    CHECK(plan.transfers[0].sample_indices.front() == 60);
    CHECK(validate_offload_plan(plan, c, data).empty());

    const auto after = execute_offload(data, plan);
    CHECK(after.at(NodeId{0}).size() == 60);
    CHECK(after.at(NodeId{1}).size() == 50);
    // Existing samples first, received samples after in plan order.
    CHECK(after.at(NodeId{1}).samples[10].features[0] == 60.0);
}

TEST_CASE("without trust edges the overloaded devices stay unresolved") {
    const auto c = leaf_cluster(2, {});
    DatasetMap data{{NodeId{0}, numbered(NodeId{0}, 100, 0)}, {NodeId{1}, numbered(NodeId{1}, 10, 0)}};
    const auto plan = plan_offload(c, data, capacities({60, 60}), 1.0, 1);
    CHECK(plan.transfers.empty());
    CHECK(plan.unresolved == std::vector<NodeId>{NodeId{0}});
}

TEST_CASE("stale indices are rejected") {
    DatasetMap data{{NodeId{0}, numbered(NodeId{0}, 3, 0)}, {NodeId{1}, numbered(NodeId{1}, 3, 0)}};
    OffloadPlan plan{{{NodeId{0}, NodeId{1}, {5}}}, {}};
    CHECK(test::error_code([&] { execute_offload(data, plan); }) == ErrorCode::stale_index);
    CHECK_FALSE(validate_offload_plan(plan, leaf_cluster(2, {{0, 1}}), data).empty());
}

TEST_CASE("random plans conserve samples, respect trust and never worsen overload") {
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<std::size_t> size(2, 8), load(0, 120);
    std::uniform_real_distribution<double> cap(10.0, 100.0);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = size(rng);
        Cluster c = leaf_cluster(n, {});
        c.trust = draw_trust_graph(n, 0.5, rng());
        DatasetMap data;
        std::vector<double> caps;
        for (std::uint32_t i = 0; i < n; ++i) {
            data[NodeId{i}] = numbered(NodeId{i}, load(rng), 1000 * static_cast<int>(i));
            caps.push_back(cap(rng));
        }
        const auto compute = capacities(caps);
        const auto plan = plan_offload(c, data, compute, 1.0, 1);
        CHECK(validate_offload_plan(plan, c, data).empty());
        const auto after = execute_offload(data, plan);
        CHECK(total(after) == total(data));
        CHECK(max_overload(c, after, compute) <= max_overload(c, data, compute));

        // Sending every moved sample back restores each dataset as a multiset.
        OffloadPlan reverse;
        std::map<NodeId, std::size_t> received_so_far;
        for (const auto& t : plan.transfers) {
            const auto base = data.at(t.destination).size() + received_so_far[t.destination];
            OffloadTransfer back{t.destination, t.source, {}};
            for (std::size_t k = 0; k < t.sample_indices.size(); ++k) back.sample_indices.push_back(base + k);
            received_so_far[t.destination] += t.sample_indices.size();
            reverse.transfers.push_back(back);
        }
        const auto restored = execute_offload(after, reverse);
        for (const auto& [id, d] : data) CHECK(keys(restored.at(id)) == keys(d));
    }
}

TEST_CASE("cache upload copies a seeded fraction") {
    const auto d = numbered(NodeId{0}, 50, 0);
    CHECK(cache_upload(NodeId{0}, d, NodeId{9}, 0.0, 1).samples.empty());
    const auto full = cache_upload(NodeId{0}, d, NodeId{9}, 1.0, 1);
    CHECK(full.samples.size() == 50);
    CHECK(full.holder == NodeId{9});
    CHECK(std::all_of(full.samples.begin(), full.samples.end(), [](const Sample& s) { return s.shared; }));
    const auto a = cache_upload(NodeId{0}, d, NodeId{9}, 0.3, 4);
    const auto b = cache_upload(NodeId{0}, d, NodeId{9}, 0.3, 4);
    CHECK(a.samples.size() == 15);
    CHECK(keys({a.samples, {}}) == keys({b.samples, {}}));
}

TEST_CASE("cache broadcast grows each member by the cache size") {
    const auto c = leaf_cluster(4, {});
    DatasetMap data;
    for (std::uint32_t i = 0; i < 4; ++i) data[NodeId{i}] = numbered(NodeId{i}, 10, 0);
    const auto cache = cache_upload(NodeId{0}, data.at(NodeId{0}), c.parent, 0.5, 1);
    const auto r = cache_broadcast(cache, c, data);
    CHECK(total(r.datasets) == 40 + 4 * 5);
    for (std::uint32_t i = 0; i < 4; ++i) CHECK(r.datasets.at(NodeId{i}).size() == 15);
    REQUIRE(r.transfers.size() == 4);
    CHECK(r.transfers[0].params == sample_payload(5, 1));
    CHECK(r.transfers[0].kind == LinkKind::downlink);

    const auto empty = cache_broadcast(Cache{c.parent, {}}, c, data);
    CHECK(total(empty.datasets) == 40);
    CHECK(empty.transfers.empty());
    CHECK(test::error_code([&] { cache_broadcast(Cache{NodeId{3}, cache.samples}, c, data); }) ==
          ErrorCode::invalid_argument);
}

}  // TEST_SUITE
