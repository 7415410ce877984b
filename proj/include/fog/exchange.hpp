#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "fog/model.hpp"
#include "fog/netmodel.hpp"
#include "fog/topology.hpp"

namespace fog {

using DatasetMap = std::map<NodeId, Dataset>;

struct OffloadTransfer {
    NodeId source{};
    NodeId destination{};
    std::vector<std::size_t> sample_indices;  // into the source's dataset before execution
};

struct OffloadPlan {
    std::vector<OffloadTransfer> transfers;
    std::vector<NodeId> unresolved;  // still over capacity after planning: straggler candidates
};

/// Samples a device can process per round: samples_per_second * deadline / steps.
std::size_t processing_capacity(const ComputeProfile& profile, double deadline, int local_steps);

/// Greedy most-slack-first offloading inside one leaf cluster. Overloaded
/// devices (lowest id first) push their highest-index excess samples to the
/// trusted neighbor with the largest slack until no overloaded device has a
/// trusted neighbor with slack left.
OffloadPlan plan_offload(const Cluster& cluster, const DatasetMap& datasets,
                         const std::map<NodeId, ComputeProfile>& compute, double deadline, int local_steps);

/// Every invariant a plan must satisfy against the cluster and datasets.
std::vector<std::string> validate_offload_plan(const OffloadPlan& plan, const Cluster& cluster,
                                               const DatasetMap& datasets);

/// Moves samples. Destinations append received samples in plan order.
DatasetMap execute_offload(DatasetMap datasets, const OffloadPlan& plan);

struct Cache {
    NodeId holder{};
    std::vector<Sample> samples;  // copies, marked shared
};

/// Copies floor(fraction * count) uniformly drawn samples of `dataset`.
/// The device keeps its own samples.
Cache cache_upload(NodeId device, const Dataset& dataset, NodeId parent, double fraction, std::uint64_t seed);

struct BroadcastResult {
    DatasetMap datasets;
    std::vector<ClusterTransfer> transfers;  // downlink, params = samples * (features + 1)
};

/// Every member of `cluster` receives a copy of every cached sample.
BroadcastResult cache_broadcast(const Cache& cache, const Cluster& cluster, DatasetMap datasets);

/// Parameters needed to carry `samples` data points of `feature_dim` features and a label.
std::uint64_t sample_payload(std::size_t samples, std::size_t feature_dim);

}  // namespace fog
