#include "fog/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "fog/error.hpp"

namespace fog {

ParameterVector weighted_average(std::span<const ParameterVector> vectors, std::span<const double> weights) {
    if (vectors.empty()) throw Error(ErrorCode::empty_input, "weighted average of an empty list");
    if (vectors.size() != weights.size())
        throw Error(ErrorCode::length_mismatch,
                    fmt::format("{} vectors but {} weights", vectors.size(), weights.size()));
    const auto g = vectors.front().size();
    double total = 0.0;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        if (vectors[i].size() != g)
            throw Error(ErrorCode::length_mismatch,
                        fmt::format("vector {} has length {}, expected {}", i, vectors[i].size(), g));
        if (weights[i] < 0.0 || std::isnan(weights[i]))
            throw Error(ErrorCode::negative_weight, fmt::format("weight {} is negative ({})", i, weights[i]));
        total += weights[i];
    }
    if (!(total > 0.0)) throw Error(ErrorCode::zero_weight_sum, "weights sum to zero");

    // Averaging offsets from the first vector returns identical inputs exactly.
    ParameterVector out = vectors.front();
    auto acc = out.values();
    const auto base = vectors.front().values();
    for (std::size_t i = 1; i < vectors.size(); ++i) {
        const double share = weights[i] / total;
        const auto v = vectors[i].values();
        for (std::size_t k = 0; k < g; ++k) acc[k] += share * (v[k] - base[k]);
    }
    return out;
}

MixingMatrix build_mixing_matrix(const Adjacency& adjacency) {
    if (!adjacency.is_connected())
        throw Error(ErrorCode::disconnected_graph, "mixing matrix needs a connected graph");
    const auto n = adjacency.order();
    std::vector<std::size_t> degree(n);
    for (std::size_t i = 0; i < n; ++i) degree[i] = adjacency.degree(i);

    MixingMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) {
        double off = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j || !adjacency(i, j)) continue;
            const double w = 1.0 / (1.0 + static_cast<double>(std::max(degree[i], degree[j])));
            m(i, j) = 0.5 * w;
            off += w;
        }
        m(i, i) = 0.5 * (1.0 - off) + 0.5;
    }
    return m;
}

namespace {

void check_states(std::span<const ParameterVector> states, std::size_t order) {
    if (states.size() != order)
        throw Error(ErrorCode::dimension_mismatch,
                    fmt::format("{} states for a mixing matrix of order {}", states.size(), order));
    for (const auto& s : states)
        if (s.size() != states.front().size())
            throw Error(ErrorCode::length_mismatch, "consensus states differ in length");
}

// One mixing step; `noise` perturbs each received neighbor message when set.
std::vector<ParameterVector> mix(std::span<const ParameterVector> states, const MixingMatrix& m,
                                 std::normal_distribution<double>* noise, std::mt19937_64* rng) {
    const auto n = m.order();
    std::vector<ParameterVector> next;
    next.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        ParameterVector acc(states[i].size());
        auto out = acc.values();
        for (std::size_t j = 0; j < n; ++j) {
            const double w = m(i, j);
            if (w == 0.0) continue;
            const auto x = states[j].values();
            if (noise != nullptr && j != i) {
                for (std::size_t k = 0; k < out.size(); ++k) out[k] += w * (x[k] + (*noise)(*rng));
            } else {
                for (std::size_t k = 0; k < out.size(); ++k) out[k] += w * x[k];
            }
        }
        next.push_back(std::move(acc));
    }
    return next;
}

}  // namespace

std::vector<ParameterVector> consensus_round(std::span<const ParameterVector> states, const MixingMatrix& matrix) {
    check_states(states, matrix.order());
    return mix(states, matrix, nullptr, nullptr);
}

ConsensusResult consensus_aggregate(const Cluster& cluster, std::span<const ParameterVector> states, int rounds,
                                    double noise_sigma, std::uint64_t seed) {
    if (cluster.mode != AggregationMode::d2d_consensus)
        throw Error(ErrorCode::invalid_mode, fmt::format("cluster {} is not in consensus mode", cluster.id));
    if (rounds < 1) throw Error(ErrorCode::invalid_argument, "consensus needs at least one round");
    if (noise_sigma < 0.0) throw Error(ErrorCode::invalid_argument, "noise sigma must be nonnegative");
    if (cluster.d2d.order() != cluster.members.size())
        throw Error(ErrorCode::dimension_mismatch, fmt::format("cluster {} D2D matrix does not match members", cluster.id));
    const auto matrix = build_mixing_matrix(cluster.d2d);
    check_states(states, matrix.order());

    ConsensusResult out{{states.begin(), states.end()}, 0};
    if (states.size() <= 1) return out;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);
    for (int r = 0; r < rounds; ++r)
        out.states = mix(out.states, matrix, noise_sigma > 0.0 ? &noise : nullptr, &rng);
    out.message_count = static_cast<std::uint64_t>(rounds) * 2 * cluster.d2d.edge_count();
    return out;
}

NodeId select_uploader(const Cluster& cluster, const std::map<NodeId, double>& residual_energy) {
    if (cluster.members.empty())
        throw Error(ErrorCode::empty_input, fmt::format("cluster {} has no members", cluster.id));
    const auto energy = [&](NodeId n) {
        const auto it = residual_energy.find(n);
        return it == residual_energy.end() ? 0.0 : it->second;
    };
    // Members are sorted, so a strict comparison keeps the lowest id on ties.
    NodeId best = cluster.members.front();
    for (const auto n : cluster.members)
        if (energy(n) > energy(best)) best = n;
    return best;
}

CompressionResult compress(const ParameterVector& vector, const CompressionConfig& cfg) {
    const auto g = vector.size();
    if (cfg.topk && (*cfg.topk < 1 || *cfg.topk > g))
        throw Error(ErrorCode::invalid_argument, fmt::format("topk {} outside [1, {}]", *cfg.topk, g));
    if (cfg.quantize_bits && (*cfg.quantize_bits < 1 || *cfg.quantize_bits > 52))
        throw Error(ErrorCode::invalid_argument, fmt::format("quantize_bits {} outside [1, 52]", *cfg.quantize_bits));

    std::vector<std::size_t> kept(g);
    std::iota(kept.begin(), kept.end(), 0);
    ParameterVector out = vector;
    if (cfg.topk && *cfg.topk < g) {
        std::stable_sort(kept.begin(), kept.end(),
                         [&](std::size_t a, std::size_t b) { return std::abs(vector[a]) > std::abs(vector[b]); });
        kept.resize(*cfg.topk);
        std::sort(kept.begin(), kept.end());
        out = ParameterVector(g);
        for (const auto i : kept) out[i] = vector[i];
    }

    if (cfg.quantize_bits && !kept.empty()) {
        double lo = out[kept.front()];
        double hi = lo;
        for (const auto i : kept) {
            lo = std::min(lo, out[i]);
            hi = std::max(hi, out[i]);
        }
        if (hi > lo) {
            const double bins = std::ldexp(1.0, *cfg.quantize_bits);
            const double width = (hi - lo) / bins;
            for (const auto i : kept) {
                const double bin = std::min(std::floor((out[i] - lo) / width), bins - 1.0);
                out[i] = lo + (bin + 0.5) * width;
            }
        }
    }
    return {std::move(out), static_cast<std::uint64_t>(kept.size())};
}

namespace {

double norm(std::span<const double> v) {
    return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

ParameterVector average_or_uniform(const std::vector<ParameterVector>& vectors, std::vector<double> weights) {
    if (std::accumulate(weights.begin(), weights.end(), 0.0) <= 0.0) std::fill(weights.begin(), weights.end(), 1.0);
    return weighted_average(vectors, weights);
}

struct Transmitted {
    ParameterVector received;
    std::uint64_t params = 0;
};

Transmitted transmit(const ParameterVector& x, const ClusterPolicy& policy, std::uint64_t seed) {
    ParameterVector payload = x;
    if (policy.reference != nullptr)
        for (std::size_t k = 0; k < payload.size(); ++k) payload[k] -= (*policy.reference)[k];

    Transmitted out{std::move(payload), x.size()};
    if (policy.compression.active()) {
        auto c = compress(out.received, policy.compression);
        out.received = std::move(c.vector);
        out.params = c.transmitted;
    }
    if (policy.reference != nullptr)
        for (std::size_t k = 0; k < out.received.size(); ++k) out.received[k] += (*policy.reference)[k];
    out.received = apply_channel_noise(out.received, policy.uplink_noise, seed);
    return out;
}

}  // namespace

ClusterAggregate aggregate_cluster(const Cluster& cluster, const std::map<NodeId, Contribution>& contributions,
                                   const ClusterPolicy& policy, const std::map<NodeId, double>& residual_energy,
                                   std::uint64_t seed) {
    std::vector<std::size_t> positions;
    for (std::size_t p = 0; p < cluster.members.size(); ++p)
        if (contributions.contains(cluster.members[p])) positions.push_back(p);
    if (positions.empty())
        throw Error(ErrorCode::empty_input, fmt::format("cluster {} has no contributing members", cluster.id));

    ClusterAggregate out;
    const auto upload = [&](UploadGroup group, const ParameterVector& state) {
        auto sent = transmit(state, policy, derive_seed(seed, 0x75, group.uploader.value));
        group.uplink_params = sent.params;
        group.received = std::move(sent.received);
        out.transfers.push_back({LinkKind::uplink, group.uploader, cluster.parent, sent.params});
        out.weight += group.weight;
        out.groups.push_back(std::move(group));
    };

    if (cluster.mode == AggregationMode::server_side) {
        for (const auto p : positions) {
            const auto node = cluster.members[p];
            const auto& c = contributions.at(node);
            upload(UploadGroup{{node}, node, 0, 0, c.weight, {}}, c.params);
        }
    } else {
        const auto sub = cluster.d2d.induced(positions);
        for (const auto& component : sub.components()) {
            Cluster group_cluster;
            group_cluster.id = cluster.id;
            group_cluster.layer = cluster.layer;
            group_cluster.parent = cluster.parent;
            group_cluster.mode = AggregationMode::d2d_consensus;
            std::vector<std::size_t> local;  // positions in `sub`
            for (const auto k : component) {
                group_cluster.members.push_back(cluster.members[positions[k]]);
                local.push_back(k);
            }
            group_cluster.d2d = sub.induced(local);

            std::vector<ParameterVector> xs;
            std::vector<double> ws;
            for (const auto node : group_cluster.members) {
                xs.push_back(contributions.at(node).params);
                ws.push_back(contributions.at(node).weight);
            }
            const double represented = std::accumulate(ws.begin(), ws.end(), 0.0);
            double wsum = represented;
            if (wsum <= 0.0) {
                std::fill(ws.begin(), ws.end(), 1.0);
                wsum = static_cast<double>(ws.size());
            }
            const auto m = static_cast<double>(xs.size());

            // Plain consensus converges to the unweighted mean, so each member
            // enters with its state scaled by m * w_i / W.
            std::vector<ParameterVector> scaled = xs;
            for (std::size_t i = 0; i < scaled.size(); ++i)
                for (auto& v : scaled[i].values()) v *= m * ws[i] / wsum;

            std::size_t max_degree = 0;
            for (std::size_t i = 0; i < group_cluster.d2d.order(); ++i)
                max_degree = std::max(max_degree, group_cluster.d2d.degree(i));

            std::vector<ParameterVector> final_states = scaled;
            if (xs.size() > 1) {
                auto result = consensus_aggregate(group_cluster, scaled, policy.consensus_rounds, policy.d2d_noise,
                                                  derive_seed(seed, 0x64, group_cluster.members.front().value));
                final_states = std::move(result.states);
                const auto per_direction = static_cast<std::uint64_t>(policy.consensus_rounds) * xs.front().size();
                for (std::size_t i = 0; i < group_cluster.d2d.order(); ++i)
                    for (std::size_t j = 0; j < group_cluster.d2d.order(); ++j)
                        if (i != j && group_cluster.d2d(i, j))
                            out.transfers.push_back({LinkKind::d2d, group_cluster.members[i], group_cluster.members[j],
                                                     per_direction});
            }

            const auto uploader = select_uploader(group_cluster, residual_energy);
            const auto& state = final_states[*group_cluster.position(uploader)];
            if (xs.size() > 1) {
                const auto exact = weighted_average(xs, ws);
                std::vector<double> diff(exact.size());
                for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = state[k] - exact[k];
                out.consensus_error_sum += norm(diff) / std::max(norm(exact.values()), 1e-12);
                ++out.consensus_groups;
            }
            upload(UploadGroup{group_cluster.members, uploader, max_degree, 0, represented, {}}, state);
        }
    }

    std::vector<ParameterVector> received;
    std::vector<double> weights;
    for (const auto& g : out.groups) {
        received.push_back(g.received);
        weights.push_back(g.weight);
    }
    out.value = average_or_uniform(received, weights);
    return out;
}

HierarchyResult hierarchical_aggregate(const FogTree& tree, const std::map<NodeId, ParameterVector>& leaf_params,
                                       const std::map<NodeId, double>& leaf_weights, const HierarchyOptions& options) {
    std::map<NodeId, Contribution> current;
    for (const auto leaf : tree.layer_nodes(0)) {
        const auto p = leaf_params.find(leaf);
        const auto w = leaf_weights.find(leaf);
        if (p == leaf_params.end() || w == leaf_weights.end())
            throw Error(ErrorCode::empty_input, fmt::format("leaf {} is missing params or weight", leaf.value));
        current[leaf] = Contribution{p->second, w->second};
    }

    HierarchyResult out;
    for (std::size_t layer = 0; layer < tree.root_layer(); ++layer) {
        std::map<NodeId, std::vector<const ClusterAggregate*>> by_parent;
        std::vector<ClusterAggregate> results;
        const auto ids = tree.layer_clusters(layer);
        results.reserve(ids.size());
        for (const auto cid : ids) {
            const auto& cluster = tree.clusters[cid];
            if (cluster.members.empty()) continue;
            results.push_back(aggregate_cluster(cluster, current, options.policy, options.residual_energy,
                                                derive_seed(options.seed, layer, cid)));
            for (const auto& t : results.back().transfers) {
                out.events.push_back(transfer_event(options.round, Phase::aggregate, t.src, t.dst, t.params,
                                                    options.costs.link(t.kind)));
                out.ledger.record(out.events.back());
            }
        }
        std::size_t k = 0;
        for (const auto cid : ids)
            if (!tree.clusters[cid].members.empty()) by_parent[tree.clusters[cid].parent].push_back(&results[k++]);

        std::map<NodeId, Contribution> next;
        for (const auto& [parent, aggregates] : by_parent) {
            std::vector<ParameterVector> values;
            std::vector<double> weights;
            for (const auto* a : aggregates) {
                values.push_back(a->value);
                weights.push_back(a->weight);
            }
            next[parent] = Contribution{average_or_uniform(values, weights),
                                        std::accumulate(weights.begin(), weights.end(), 0.0)};
        }
        current = std::move(next);
    }
    out.root = current.at(tree.root()).params;
    return out;
}

}  // namespace fog
