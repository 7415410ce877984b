#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fog/types.hpp"

namespace fog {

/// Flat model parameter vector of fixed length G. Every transfer in the
/// simulator moves exactly one of these.
class ParameterVector {
public:
    ParameterVector() = default;
    explicit ParameterVector(std::size_t length, double fill = 0.0) : values_(length, fill) {}
    explicit ParameterVector(std::vector<double> values) : values_(std::move(values)) {}

    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] std::span<double> values() noexcept { return values_; }

    [[nodiscard]] bool all_finite() const noexcept;

    bool operator==(const ParameterVector&) const = default;

private:
    std::vector<double> values_;
};

struct Sample {
    std::vector<double> features;
    int label = 0;
    bool shared = false;  // copy obtained through an inter-layer cache
};

struct Dataset {
    std::vector<Sample> samples;
    NodeId owner{};

    [[nodiscard]] bool empty() const noexcept { return samples.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
};

struct LossReport {
    double loss = 0.0;      // mean cross-entropy, nats
    double accuracy = 0.0;  // fraction in [0, 1]
    std::size_t sample_count = 0;
};

/// Shape of the multinomial logistic-regression model. Parameters are stored
/// class-major: weight of feature j for class c lives at index c * feature_dim + j.
struct ModelShape {
    std::size_t feature_dim = 0;
    std::size_t class_count = 0;

    [[nodiscard]] std::size_t parameter_count() const noexcept { return feature_dim * class_count; }
};

ParameterVector init_model(std::size_t feature_dim, std::size_t class_count);

ParameterVector compute_gradient(const ParameterVector& params, const Dataset& batch, const ModelShape& shape);

struct LocalUpdateResult {
    ParameterVector params;
    bool passive = false;  // device had no data; params returned unchanged
};

/// `steps` full-batch gradient-descent steps with fixed learning rate.
LocalUpdateResult local_update(const ParameterVector& params, const Dataset& data, const ModelShape& shape,
                               int steps, double lr);

LossReport evaluate(const ParameterVector& params, const Dataset& data, const ModelShape& shape);

ParameterVector centralized_train(const Dataset& all_data, const ModelShape& shape, int rounds, int steps,
                                  double lr);

struct PartitionSpec {
    std::size_t device_count = 20;
    std::size_t samples_per_device = 200;
    std::size_t feature_dim = 10;
    std::size_t class_count = 5;
    double dirichlet_alpha = 1.0;
    std::size_t test_samples = 1000;
    double class_separation = 1.0;  // std of the per-class mean coordinates
};

struct Partition {
    std::vector<Dataset> devices;  // devices[i].owner == NodeId{i}
    Dataset test;
};

/// Class-conditional unit-variance Gaussians with Dirichlet label skew per
/// device. Per-device label counts are the largest-remainder rounding of the
/// drawn proportions, so the only randomness in a histogram is the Dirichlet draw.
Partition generate_partitions(const PartitionSpec& spec, std::uint64_t seed);

std::vector<std::size_t> label_histogram(const Dataset& data, std::size_t class_count);

/// 1 - total-variation distance between the two label histograms.
double distribution_similarity(const Dataset& local, const Dataset& global, std::size_t class_count);

Dataset pool(std::span<const Dataset> parts);

}  // namespace fog
