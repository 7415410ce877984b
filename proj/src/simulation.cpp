#include "fog/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

#include "fog/aggregation.hpp"
#include "fog/error.hpp"
#include "fog/exchange.hpp"

namespace fog {

namespace {

// Stream tags for derive_seed(seed, tag, ...). Each phase draws from its own
// stream so that changing one phase never shifts another's randomness.
enum StreamTag : std::uint64_t {
    kTopology = 0x746f70,
    kSlowDevices = 0x736c6f,
    kMobility = 0x6d6f62,
    kSampling = 0x736d70,
    kCache = 0x636163,
    kAggregate = 0x616767,
    kBroadcast = 0x62726f,
};

}  // namespace

std::vector<ClusterId> sample_clusters(std::span<const ClusterId> leaf_clusters, double fraction, std::uint64_t seed,
                                       int round) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw Error(ErrorCode::invalid_config, fmt::format("sampling_fraction must be in (0, 1] (got {})", fraction));
    if (leaf_clusters.empty()) return {};
    const auto count = leaf_clusters.size();
    const auto k = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(fraction * static_cast<double>(count))), 1, count);

    std::vector<ClusterId> pool(leaf_clusters.begin(), leaf_clusters.end());
    std::sort(pool.begin(), pool.end());
    std::vector<ClusterId> chosen;
    std::mt19937_64 rng(derive_seed(seed, kSampling, static_cast<std::uint64_t>(round)));
    std::sample(pool.begin(), pool.end(), std::back_inserter(chosen), k, rng);
    return chosen;
}

std::vector<BlockAction> schedule_round(std::span<const LearningBlock> blocks, int round) {
    if (round < 1) throw Error(ErrorCode::invalid_argument, "rounds are numbered from 1");
    std::vector<BlockAction> out;
    out.reserve(blocks.size());
    for (const auto& b : blocks)
        out.push_back(round % b.vertical_period == 0 ? BlockAction::intra_and_vertical : BlockAction::intra_only);
    return out;
}

std::vector<LearningBlock> default_blocks(const FogTree& tree, const SimulationConfig& config) {
    const auto layer = std::min(config.blocks.layer, tree.root_layer());
    std::vector<LearningBlock> blocks;
    for (const auto head : tree.layer_nodes(layer)) {
        const auto i = blocks.size();
        const int period = config.blocks.periods.empty() ? config.blocks.vertical_period : config.blocks.periods.at(i);
        blocks.push_back({i, head, period, config.blocks.intra_rounds});
    }
    return blocks;
}

Scenario build_scenario(const SimulationConfig& config) {
    if (const auto v = config.validate(); !v.empty())
        throw Error(ErrorCode::invalid_config, fmt::format("invalid config: {}", fmt::join(v, "; ")));

    PartitionSpec spec;
    spec.device_count = config.device_count();
    spec.samples_per_device = config.data.samples_per_device;
    spec.feature_dim = config.data.feature_dim;
    spec.class_count = config.data.classes;
    spec.dirichlet_alpha = config.data.dirichlet_alpha;
    spec.test_samples = config.data.test_samples;
    spec.class_separation = config.data.class_separation;

    Scenario s;
    s.partition = generate_partitions(spec, config.seed);
    s.tree = build_tree(config.layers, derive_seed(config.seed, kTopology),
                        TreeOptions{config.offloading.trust_density});

    const auto n = config.device_count();
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0U);
    std::mt19937_64 rng(derive_seed(config.seed, kSlowDevices));
    std::shuffle(order.begin(), order.end(), rng);
    const auto slow = static_cast<std::size_t>(std::llround(config.compute.slow_fraction * static_cast<double>(n)));
    const std::set<std::uint32_t> slow_ids(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(slow));

    for (std::uint32_t i = 0; i < n; ++i) {
        const NodeId id{i};
        s.tree.datasets[id] = s.partition.devices[i];
        ComputeProfile profile{config.compute.samples_per_second, config.compute.energy_per_sample_step};
        if (slow_ids.contains(i)) profile.samples_per_second /= config.compute.slow_factor;
        s.tree.compute[id] = profile;
    }
    return s;
}

namespace {

ParameterVector average_or_uniform(const std::vector<ParameterVector>& values, std::vector<double> weights) {
    if (std::accumulate(weights.begin(), weights.end(), 0.0) <= 0.0) std::fill(weights.begin(), weights.end(), 1.0);
    return weighted_average(values, weights);
}

class Engine {
public:
    explicit Engine(const SimulationConfig& config) : cfg_(config) {
        auto scenario = build_scenario(config);
        tree_ = std::move(scenario.tree);
        test_ = std::move(scenario.partition.test);
        shape_ = {config.data.feature_dim, config.data.classes};
        global_ = init_model(shape_.feature_dim, shape_.class_count);
        for (const auto leaf : tree_.layer_nodes(0)) device_model_[leaf] = global_;
        blocks_ = default_blocks(tree_, config);
        head_layer_ = std::min(config.blocks.layer, tree_.root_layer());
        result_.device_count = config.device_count();
    }

    SimulationResult run() {
        if (cfg_.training.global_rounds == 0) {
            emit_row(0);
            result_.consensus_error.push_back(0.0);
        }
        for (int r = 1; r <= cfg_.training.global_rounds; ++r) {
            try {
                run_round(r);
            } catch (const Error& e) {
                throw Error(e.code(), fmt::format("round {}, phase {}: {}", r, to_string(phase_), e.what()));
            }
        }
        result_.final_params = global_;
        result_.ledger = ledger_;
        return std::move(result_);
    }

private:
    // ------------------------------------------------------------ bookkeeping

    void emit(const Event& e) {
        ledger_.record(e);
        totals_.add(e);
        result_.events.push_back(e);
    }

    void emit_transfer(int round, const ClusterTransfer& t) {
        emit(transfer_event(round, phase_, t.src, t.dst, t.params, cfg_.costs.link(t.kind)));
    }

    void emit_row(int round) {
        phase_ = Phase::evaluate;
        const auto report = evaluate(global_, test_, shape_);
        result_.rows.push_back({round, report.loss, report.accuracy, totals_.uplink_params, totals_.downlink_params,
                                totals_.d2d_params, totals_.energy_joules, totals_.round_delay_seconds,
                                totals_.stragglers_dropped, totals_.clusters_sampled, totals_.samples_moved});
    }

    std::map<NodeId, double> residual_energy() const {
        std::map<NodeId, double> out;
        for (const auto& [id, node] : tree_.nodes) out[id] = cfg_.battery_j - ledger_.energy(id);
        return out;
    }

    [[nodiscard]] std::size_t sample_count(NodeId device) const {
        const auto it = tree_.datasets.find(device);
        return it == tree_.datasets.end() ? 0 : it->second.size();
    }

    [[nodiscard]] const ComputeProfile& profile(NodeId device) const { return tree_.compute.at(device); }

    // ------------------------------------------------------------ phases

    void mobility_phase(int round) {
        phase_ = Phase::mobility;
        const auto events = generate_mobility_events(tree_, cfg_.mobility, round, derive_seed(cfg_.seed, kMobility));
        for (const auto& ev : events) {
            const auto carried = sample_count(ev.node);
            tree_ = apply_mobility_event(std::move(tree_), ev, derive_seed(cfg_.seed, kMobility, 1));
            if (ev.kind == MobilityKind::migrate) {
                const auto& dest = tree_.clusters[ev.destination_cluster];
                emit({round, phase_, EventKind::migrate, ev.node, dest.parent, 0, 0.0, 0.0});
                // The newcomer continues from the destination cluster's latest aggregate.
                const auto last = cluster_last_.find(dest.id);
                device_model_[ev.node] = last != cluster_last_.end() ? last->second.params : global_;
            } else {
                device_model_.erase(ev.node);
                emit({round, phase_, EventKind::depart, ev.node, ev.handover_peer.value_or(ev.node), 0, 0.0, 0.0});
                if (ev.handover_peer)
                    emit({round, phase_, EventKind::samples_moved, ev.node, *ev.handover_peer, carried, 0.0, 0.0});
                else
                    emit({round, phase_, EventKind::data_loss, ev.node, ev.node, carried, 0.0, 0.0});
            }
        }
    }

    std::vector<ClusterId> sampling_phase(int round) {
        phase_ = Phase::sampling;
        std::vector<ClusterId> leaf_clusters;
        for (const auto id : tree_.layer_clusters(0))
            if (!tree_.clusters[id].members.empty()) leaf_clusters.push_back(id);
        auto selected = sample_clusters(leaf_clusters, cfg_.sampling_fraction, cfg_.seed, round);
        for (const auto id : selected) {
            const auto parent = tree_.clusters[id].parent;
            emit({round, phase_, EventKind::sampled, parent, parent, 0, 0.0, 0.0});
        }
        return selected;
    }

    // Returns the phase duration.
    double cache_phase(int round) {
        phase_ = Phase::cache;
        std::map<NodeId, Cache> caches;
        double upload_time = 0.0;
        for (const auto leaf : tree_.layer_nodes(0)) {
            const auto parent = *tree_.node(leaf).parent;
            auto delta = cache_upload(leaf, tree_.datasets.at(leaf), parent, cfg_.cache_fraction,
                                      derive_seed(cfg_.seed, kCache, static_cast<std::uint64_t>(round)));
            if (delta.samples.empty()) continue;
            const ClusterTransfer t{LinkKind::uplink, leaf, parent, sample_payload(delta.samples.size(), shape_.feature_dim)};
            emit_transfer(round, t);
            upload_time = std::max(upload_time, transmission_cost(t.params, cfg_.costs.uplink).delay);
            auto& cache = caches.try_emplace(parent, Cache{parent, {}}).first->second;
            cache.samples.insert(cache.samples.end(), delta.samples.begin(), delta.samples.end());
        }
        double broadcast_time = 0.0;
        for (const auto id : tree_.layer_clusters(0)) {
            const auto& cluster = tree_.clusters[id];
            const auto it = caches.find(cluster.parent);
            if (it == caches.end() || cluster.members.empty()) continue;
            auto result = cache_broadcast(it->second, cluster, std::move(tree_.datasets));
            tree_.datasets = std::move(result.datasets);
            for (const auto& t : result.transfers) {
                emit_transfer(round, t);
                broadcast_time = std::max(broadcast_time, transmission_cost(t.params, cfg_.costs.downlink).delay);
            }
        }
        return upload_time + broadcast_time;
    }

    double offload_phase(int round, const std::vector<ClusterId>& selected) {
        phase_ = Phase::offload;
        double duration = 0.0;
        for (const auto id : selected) {
            const auto& cluster = tree_.clusters[id];
            const auto plan =
                plan_offload(cluster, tree_.datasets, tree_.compute, *cfg_.deadline, cfg_.training.local_steps);
            if (const auto v = validate_offload_plan(plan, cluster, tree_.datasets); !v.empty())
                throw Error(ErrorCode::invalid_argument, fmt::format("offload plan rejected: {}", fmt::join(v, "; ")));
            tree_.datasets = execute_offload(std::move(tree_.datasets), plan);
            for (const auto& t : plan.transfers) {
                const auto count = t.sample_indices.size();
                const ClusterTransfer transfer{LinkKind::d2d, t.source, t.destination,
                                               sample_payload(count, shape_.feature_dim)};
                emit_transfer(round, transfer);
                emit({round, phase_, EventKind::samples_moved, t.source, t.destination, count, 0.0, 0.0});
                duration = std::max(duration, transmission_cost(transfer.params, cfg_.costs.d2d).delay);
            }
        }
        return duration;
    }

    void train(int round, NodeId device, std::map<NodeId, double>* ready) {
        const auto& data = tree_.datasets.at(device);
        auto update = local_update(device_model_.at(device), data, shape_, cfg_.training.local_steps, cfg_.training.lr);
        device_model_[device] = std::move(update.params);
        const auto seconds = compute_delay(profile(device), data.size(), cfg_.training.local_steps);
        const auto joules = compute_energy(profile(device), data.size(), cfg_.training.local_steps);
        emit({round, Phase::local, EventKind::compute, device, device, 0, joules, seconds});
        if (ready != nullptr) (*ready)[device] += seconds;
    }

    struct Level {
        std::map<NodeId, Contribution> values;
    };

    // Aggregates clusters of layers [from, to) upward. `contributed` collects
    // every node that delivered a value; `ready` carries arrival times.
    std::map<NodeId, Contribution> upward(int round, std::map<NodeId, Contribution> level, std::size_t from,
                                          std::size_t to, const std::set<ClusterId>& selected,
                                          std::map<NodeId, double>& ready, std::set<NodeId>& contributed) {
        const auto energy = residual_energy();
        ClusterPolicy policy;
        policy.consensus_rounds = cfg_.consensus.rounds;
        policy.d2d_noise = cfg_.consensus.sigma;
        policy.uplink_noise = cfg_.costs.uplink.noise_sigma;
        policy.compression = cfg_.compression;
        policy.reference = &round_start_;

        for (std::size_t layer = from; layer < to; ++layer) {
            struct Inbound {
                std::vector<ParameterVector> values;
                std::vector<double> weights;
                double arrival = 0.0;
            };
            std::map<NodeId, Inbound> inbound;
            for (const auto id : tree_.layer_clusters(layer)) {
                const auto& cluster = tree_.clusters[id];
                if (cluster.members.empty()) continue;
                const bool any = std::any_of(cluster.members.begin(), cluster.members.end(),
                                             [&](NodeId m) { return level.contains(m); });
                if (!any) {
                    // A sampled leaf cluster whose devices all missed the deadline
                    // falls back to the aggregate it delivered last time.
                    const auto last = cluster_last_.find(id);
                    if (layer == 0 && selected.contains(id) && last != cluster_last_.end()) {
                        emit({round, phase_, EventKind::stale, cluster.parent, cluster.parent, 0, 0.0, 0.0});
                        auto& in = inbound[cluster.parent];
                        in.values.push_back(last->second.params);
                        in.weights.push_back(last->second.weight);
                        in.arrival = std::max(in.arrival, ready[cluster.parent]);
                    }
                    continue;
                }
                const auto agg = aggregate_cluster(
                    cluster, level, policy, energy,
                    derive_seed(cfg_.seed, kAggregate, static_cast<std::uint64_t>(round), layer, id, ++pass_));
                for (const auto& t : agg.transfers) emit_transfer(round, t);
                consensus_error_sum_ += agg.consensus_error_sum;
                consensus_groups_ += agg.consensus_groups;

                auto& in = inbound[cluster.parent];
                in.values.push_back(agg.value);
                in.weights.push_back(agg.weight);
                for (const auto& g : agg.groups) {
                    double start = 0.0;
                    for (const auto m : g.members) {
                        start = std::max(start, ready[m]);
                        contributed.insert(m);
                    }
                    if (g.members.size() > 1)
                        start += static_cast<double>(cfg_.consensus.rounds) * static_cast<double>(g.max_degree) *
                                 static_cast<double>(shape_.parameter_count()) / cfg_.costs.d2d.rate;
                    in.arrival = std::max(in.arrival, start + transmission_cost(g.uplink_params, cfg_.costs.uplink).delay);
                }
                if (layer == 0) cluster_last_[id] = Contribution{agg.value, agg.weight};
            }

            std::map<NodeId, Contribution> next;
            for (auto& [parent, in] : inbound) {
                const double weight = std::accumulate(in.weights.begin(), in.weights.end(), 0.0);
                next[parent] = Contribution{average_or_uniform(in.values, std::move(in.weights)), weight};
                ready[parent] = in.arrival;
                contributed.insert(parent);
            }
            level = std::move(next);
        }
        return level;
    }

    void broadcast(int round, NodeId from, const ParameterVector& value, const std::set<NodeId>& contributed,
                   std::map<NodeId, double>& ready) {
        phase_ = Phase::broadcast;
        for (const auto child : tree_.children(from)) {
            if (!contributed.contains(child)) continue;
            const auto params = static_cast<std::uint64_t>(value.size());
            emit_transfer(round, {LinkKind::downlink, from, child, params});
            ready[child] = ready[from] + transmission_cost(params, cfg_.costs.downlink).delay;
            auto received = apply_channel_noise(value, cfg_.costs.downlink.noise_sigma,
                                                derive_seed(cfg_.seed, kBroadcast, static_cast<std::uint64_t>(round),
                                                            child.value, ++pass_));
            if (tree_.node(child).layer == 0) device_model_[child] = std::move(received);
            else broadcast(round, child, received, contributed, ready);
        }
    }

    void run_round(int round) {
        totals_ = {};
        consensus_error_sum_ = 0.0;
        consensus_groups_ = 0;
        round_start_ = global_;

        mobility_phase(round);
        const auto selected_list = sampling_phase(round);
        const std::set<ClusterId> selected(selected_list.begin(), selected_list.end());

        double clock = 0.0;
        if (round == 1 && cfg_.cache_fraction > 0.0) clock += cache_phase(round);
        if (cfg_.offloading.enabled && cfg_.deadline) clock += offload_phase(round, selected_list);

        phase_ = Phase::straggler;
        std::set<NodeId> selected_devices;
        for (const auto id : selected)
            for (const auto m : tree_.clusters[id].members) selected_devices.insert(m);
        std::map<NodeId, double> delays;
        for (const auto d : selected_devices)
            if (sample_count(d) > 0) delays[d] = compute_delay(profile(d), sample_count(d), cfg_.training.local_steps);
        std::vector<NodeId> participants;
        double end_time = clock;
        if (cfg_.deadline) {
            auto outcome = apply_straggler_policy(delays, *cfg_.deadline);
            participants = std::move(outcome.participants);
            for (const auto d : outcome.dropped) emit({round, phase_, EventKind::drop, d, d, 0, 0.0, delays.at(d)});
            if (!outcome.dropped.empty()) end_time = clock + *cfg_.deadline;
        } else {
            for (const auto& [d, delay] : delays) participants.push_back(d);
        }

        const auto actions = schedule_round(blocks_, round);
        const auto root = tree_.root();
        std::map<NodeId, double> ready;
        for (const auto d : participants) ready[d] = clock;

        for (int cycle = 1; cycle <= cfg_.blocks.intra_rounds; ++cycle) {
            const bool last_cycle = cycle == cfg_.blocks.intra_rounds;
            phase_ = Phase::local;
            for (const auto d : participants) train(round, d, &ready);
            if (cfg_.continue_unsampled)
                for (const auto& [leaf, data] : tree_.datasets)
                    if (!selected_devices.contains(leaf) && !data.empty()) train(round, leaf, nullptr);

            phase_ = Phase::aggregate;
            std::map<NodeId, Contribution> leaves;
            for (const auto d : participants)
                leaves[d] = Contribution{device_model_.at(d), static_cast<double>(sample_count(d))};
            std::set<NodeId> contributed(participants.begin(), participants.end());
            auto heads = upward(round, std::move(leaves), 0, head_layer_, selected, ready, contributed);

            std::map<NodeId, Contribution> vertical;
            for (std::size_t b = 0; b < blocks_.size(); ++b) {
                const auto head = blocks_[b].head;
                const auto it = heads.find(head);
                if (it == heads.end()) continue;
                if (head == root) {
                    global_ = it->second.params;
                    broadcast(round, root, global_, contributed, ready);
                } else if (last_cycle && actions[b] == BlockAction::intra_and_vertical) {
                    vertical.insert(*it);
                } else {
                    broadcast(round, head, it->second.params, contributed, ready);
                }
            }
            if (!vertical.empty()) {
                phase_ = Phase::vertical;
                std::set<NodeId> path;
                for (const auto& [head, c] : vertical) path.insert(head);
                std::set<NodeId> vertical_contributed = contributed;
                auto top = upward(round, std::move(vertical), head_layer_, tree_.root_layer(), selected, ready,
                                  vertical_contributed);
                global_ = top.at(root).params;
                // Broadcast only into the subtrees that went vertical this round.
                std::set<NodeId> reach;
                for (const auto n : vertical_contributed) {
                    auto cursor = std::optional<NodeId>(n);
                    while (cursor && tree_.node(*cursor).layer < head_layer_) cursor = tree_.node(*cursor).parent;
                    if (!cursor || tree_.node(*cursor).layer > head_layer_ || path.contains(*cursor)) reach.insert(n);
                }
                broadcast(round, root, global_, reach, ready);
            }
        }

        for (const auto& [node, t] : ready) end_time = std::max(end_time, t);
        phase_ = Phase::evaluate;
        emit({round, phase_, EventKind::round_end, root, root, 0, 0.0, end_time});
        result_.consensus_error.push_back(consensus_groups_ > 0 ? consensus_error_sum_ / static_cast<double>(consensus_groups_)
                                                                : 0.0);
        emit_row(round);
    }

    const SimulationConfig& cfg_;
    FogTree tree_;
    Dataset test_;
    ModelShape shape_;
    ParameterVector global_;
    ParameterVector round_start_;
    std::map<NodeId, ParameterVector> device_model_;
    std::map<ClusterId, Contribution> cluster_last_;
    std::vector<LearningBlock> blocks_;
    std::size_t head_layer_ = 1;

    Ledgers ledger_;
    RoundTotals totals_;
    Phase phase_ = Phase::mobility;
    double consensus_error_sum_ = 0.0;
    std::size_t consensus_groups_ = 0;
    std::uint64_t pass_ = 0;
    SimulationResult result_;
};

}  // namespace

SimulationResult run_simulation(const SimulationConfig& config) { return Engine(config).run(); }

SimulationConfig star_config(const SimulationConfig& config) {
    SimulationConfig star = config;
    const auto n = config.device_count();
    star.layers = {LayerSpec{n, n, D2DModel{}, false}, LayerSpec{1, 1, D2DModel{}, false}};
    star.sampling_fraction = 1.0;
    star.mobility = MobilityRates{};
    star.offloading.enabled = false;
    star.cache_fraction = 0.0;
    star.blocks.layer = 1;
    star.blocks.vertical_period = 1;
    star.blocks.periods.clear();
    return star;
}

SimulationResult run_centralized(const SimulationConfig& config) {
    auto scenario = build_scenario(config);
    const ModelShape shape{config.data.feature_dim, config.data.classes};
    const auto pooled = pool(scenario.partition.devices);
    auto params = init_model(shape.feature_dim, shape.class_count);

    SimulationResult out;
    out.device_count = config.device_count();
    const auto row = [&](int round) {
        const auto report = evaluate(params, scenario.partition.test, shape);
        MetricsRow m;
        m.round = round;
        m.global_loss = report.loss;
        m.global_accuracy = report.accuracy;
        out.rows.push_back(m);
        out.consensus_error.push_back(0.0);
    };
    if (config.training.global_rounds == 0) row(0);
    for (int r = 1; r <= config.training.global_rounds; ++r) {
        params = local_update(params, pooled, shape, config.training.local_steps * config.blocks.intra_rounds,
                              config.training.lr)
                     .params;
        row(r);
    }
    out.final_params = params;
    return out;
}

BaselineResults run_baselines(const SimulationConfig& config) {
    return {run_simulation(star_config(config)), run_centralized(config)};
}

}  // namespace fog
