#include "fog/exchange.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

#include "fog/error.hpp"

namespace fog {

std::size_t processing_capacity(const ComputeProfile& profile, double deadline, int local_steps) {
    const double cap = profile.samples_per_second * deadline / static_cast<double>(std::max(local_steps, 1));
    if (!std::isfinite(cap) || cap >= static_cast<double>(std::numeric_limits<std::size_t>::max() / 2))
        return std::numeric_limits<std::size_t>::max() / 2;
    return static_cast<std::size_t>(std::floor(cap));
}

OffloadPlan plan_offload(const Cluster& cluster, const DatasetMap& datasets,
                         const std::map<NodeId, ComputeProfile>& compute, double deadline, int local_steps) {
    const auto n = cluster.members.size();
    std::vector<std::size_t> load(n), cap(n), remaining(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto node = cluster.members[i];
        const auto d = datasets.find(node);
        load[i] = remaining[i] = d == datasets.end() ? 0 : d->second.size();
        const auto c = compute.find(node);
        cap[i] = processing_capacity(c == compute.end() ? ComputeProfile{} : c->second, deadline, local_steps);
    }
    const bool trusted = cluster.trust.order() == n;

    OffloadPlan plan;
    for (std::size_t i = 0; i < n; ++i) {
        while (load[i] > cap[i] && trusted) {
            std::optional<std::size_t> best;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i || !cluster.trust(i, j) || load[j] >= cap[j]) continue;
                if (!best || cap[j] - load[j] > cap[*best] - load[*best]) best = j;
            }
            if (!best) break;
            const auto amount = std::min(load[i] - cap[i], cap[*best] - load[*best]);
            OffloadTransfer t{cluster.members[i], cluster.members[*best], {}};
            t.sample_indices.resize(amount);
            std::iota(t.sample_indices.begin(), t.sample_indices.end(), remaining[i] - amount);
            remaining[i] -= amount;
            load[i] -= amount;
            load[*best] += amount;
            plan.transfers.push_back(std::move(t));
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (load[i] > cap[i]) plan.unresolved.push_back(cluster.members[i]);
    return plan;
}

std::vector<std::string> validate_offload_plan(const OffloadPlan& plan, const Cluster& cluster,
                                               const DatasetMap& datasets) {
    std::vector<std::string> v;
    std::map<NodeId, std::set<std::size_t>> taken;
    for (std::size_t k = 0; k < plan.transfers.size(); ++k) {
        const auto& t = plan.transfers[k];
        if (t.source == t.destination) v.push_back(fmt::format("transfer {}: source equals destination", k));
        const auto s = cluster.position(t.source);
        const auto d = cluster.position(t.destination);
        if (!s || !d) {
            v.push_back(fmt::format("transfer {}: endpoint outside cluster {}", k, cluster.id));
            continue;
        }
        if (cluster.trust.order() != cluster.members.size() || !cluster.trust(*s, *d))
            v.push_back(fmt::format("transfer {}: no trust edge {} - {}", k, t.source.value, t.destination.value));
        const auto it = datasets.find(t.source);
        const auto size = it == datasets.end() ? 0 : it->second.size();
        for (const auto idx : t.sample_indices) {
            if (idx >= size) v.push_back(fmt::format("transfer {}: index {} out of range", k, idx));
            if (!taken[t.source].insert(idx).second)
                v.push_back(fmt::format("transfer {}: index {} moved twice", k, idx));
        }
    }
    return v;
}

DatasetMap execute_offload(DatasetMap datasets, const OffloadPlan& plan) {
    std::map<NodeId, std::set<std::size_t>> removed;
    std::map<NodeId, std::vector<Sample>> received;
    for (const auto& t : plan.transfers) {
        const auto it = datasets.find(t.source);
        const auto size = it == datasets.end() ? 0 : it->second.size();
        auto& gone = removed[t.source];
        for (const auto idx : t.sample_indices) {
            if (idx >= size || !gone.insert(idx).second)
                throw Error(ErrorCode::stale_index,
                            fmt::format("offload index {} of node {} is stale", idx, t.source.value));
            received[t.destination].push_back(it->second.samples[idx]);
        }
    }
    for (const auto& [node, gone] : removed) {
        auto& samples = datasets[node].samples;
        std::vector<Sample> kept;
        kept.reserve(samples.size() - gone.size());
        for (std::size_t i = 0; i < samples.size(); ++i)
            if (!gone.contains(i)) kept.push_back(std::move(samples[i]));
        samples = std::move(kept);
    }
    for (auto& [node, incoming] : received) {
        auto& samples = datasets[node].samples;
        datasets[node].owner = node;
        samples.insert(samples.end(), std::make_move_iterator(incoming.begin()), std::make_move_iterator(incoming.end()));
    }
    return datasets;
}

Cache cache_upload(NodeId device, const Dataset& dataset, NodeId parent, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0))
        throw Error(ErrorCode::invalid_argument, fmt::format("cache fraction {} outside [0, 1]", fraction));
    Cache cache{parent, {}};
    // Only the device's own samples are eligible; copies it received from a
    // cache are not uploaded again.
    std::vector<std::size_t> own;
    for (std::size_t i = 0; i < dataset.size(); ++i)
        if (!dataset.samples[i].shared) own.push_back(i);
    const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(own.size())));
    if (count == 0) return cache;

    std::vector<std::size_t> chosen;
    std::mt19937_64 rng(derive_seed(seed, device.value));
    std::sample(own.begin(), own.end(), std::back_inserter(chosen), count, rng);
    for (const auto i : chosen) {
        cache.samples.push_back(dataset.samples[i]);
        cache.samples.back().shared = true;
    }
    return cache;
}

BroadcastResult cache_broadcast(const Cache& cache, const Cluster& cluster, DatasetMap datasets) {
    BroadcastResult out{std::move(datasets), {}};
    if (cache.samples.empty()) return out;
    if (cache.holder != cluster.parent)
        throw Error(ErrorCode::invalid_argument,
                    fmt::format("cache held by {} cannot broadcast into cluster {} under {}", cache.holder.value,
                                cluster.id, cluster.parent.value));
    const auto payload = sample_payload(cache.samples.size(), cache.samples.front().features.size());
    for (const auto member : cluster.members) {
        auto& d = out.datasets[member];
        d.owner = member;
        d.samples.insert(d.samples.end(), cache.samples.begin(), cache.samples.end());
        out.transfers.push_back({LinkKind::downlink, cache.holder, member, payload});
    }
    return out;
}

std::uint64_t sample_payload(std::size_t samples, std::size_t feature_dim) {
    return static_cast<std::uint64_t>(samples) * (feature_dim + 1);
}

}  // namespace fog
