#include "fog/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "fog/error.hpp"

namespace fog {

bool ParameterVector::all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

namespace {

void check_shape(const ParameterVector& params, const ModelShape& shape) {
    if (params.size() != shape.parameter_count()) {
        throw Error(ErrorCode::length_mismatch,
                    fmt::format("parameter vector has length {}, model expects {}", params.size(),
                                shape.parameter_count()));
    }
}

// Writes class scores for one sample into `logits` and returns log-sum-exp.
double class_logits(const ParameterVector& params, const Sample& sample, const ModelShape& shape,
                    std::vector<double>& logits) {
    const auto d = shape.feature_dim;
    const auto w = params.values();
    double top = -INFINITY;
    for (std::size_t c = 0; c < shape.class_count; ++c) {
        const auto row = w.subspan(c * d, d);
        logits[c] = std::inner_product(row.begin(), row.end(), sample.features.begin(), 0.0);
        top = std::max(top, logits[c]);
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < shape.class_count; ++c) sum += std::exp(logits[c] - top);
    return top + std::log(sum);
}

// One full-batch gradient-descent step in place.
void descend(ParameterVector& params, const Dataset& data, const ModelShape& shape, double lr) {
    const auto grad = compute_gradient(params, data, shape);
    auto w = params.values();
    const auto g = grad.values();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
}

std::vector<std::size_t> largest_remainder(const std::vector<double>& proportions, std::size_t total) {
    std::vector<std::size_t> counts(proportions.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < proportions.size(); ++c) {
        const double exact = proportions[c] * static_cast<double>(total);
        counts[c] = static_cast<std::size_t>(std::floor(exact));
        assigned += counts[c];
        remainders.emplace_back(exact - std::floor(exact), c);
    }
    // Largest remainder first, lowest class index on ties.
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++counts[remainders[k % remainders.size()].second];
    return counts;
}

Dataset draw_samples(const std::vector<std::vector<double>>& means, const std::vector<std::size_t>& counts,
                     std::mt19937_64& rng) {
    std::vector<int> labels;
    for (std::size_t c = 0; c < counts.size(); ++c) labels.insert(labels.end(), counts[c], static_cast<int>(c));
    std::shuffle(labels.begin(), labels.end(), rng);

    std::normal_distribution<double> unit(0.0, 1.0);
    Dataset data;
    data.samples.reserve(labels.size());
    for (int label : labels) {
        Sample s;
        s.label = label;
        s.features.resize(means[static_cast<std::size_t>(label)].size());
        for (std::size_t j = 0; j < s.features.size(); ++j)
            s.features[j] = means[static_cast<std::size_t>(label)][j] + unit(rng);
        data.samples.push_back(std::move(s));
    }
    return data;
}

}  // namespace

ParameterVector init_model(std::size_t feature_dim, std::size_t class_count) {
    if (feature_dim < 1) throw Error(ErrorCode::invalid_config, "feature_dim must be at least 1");
    if (class_count < 2) throw Error(ErrorCode::invalid_config, "class_count must be at least 2");
    return ParameterVector(feature_dim * class_count);
}

ParameterVector compute_gradient(const ParameterVector& params, const Dataset& batch, const ModelShape& shape) {
    if (batch.empty()) throw Error(ErrorCode::empty_batch, "gradient requested on an empty batch");
    check_shape(params, shape);

    const auto d = shape.feature_dim;
    ParameterVector grad(params.size());
    auto g = grad.values();
    std::vector<double> logits(shape.class_count);
    for (const auto& sample : batch.samples) {
        const double lse = class_logits(params, sample, shape, logits);
        for (std::size_t c = 0; c < shape.class_count; ++c) {
            const double residual = std::exp(logits[c] - lse) - (static_cast<std::size_t>(sample.label) == c ? 1.0 : 0.0);
            for (std::size_t j = 0; j < d; ++j) g[c * d + j] += residual * sample.features[j];
        }
    }
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (auto& v : g) v *= inv_n;
    return grad;
}

LocalUpdateResult local_update(const ParameterVector& params, const Dataset& data, const ModelShape& shape,
                               int steps, double lr) {
    if (data.empty()) return {params, true};
    if (steps < 0) throw Error(ErrorCode::invalid_argument, "steps must be nonnegative");
    ParameterVector w = params;
    for (int s = 0; s < steps; ++s) descend(w, data, shape, lr);
    return {std::move(w), false};
}

LossReport evaluate(const ParameterVector& params, const Dataset& data, const ModelShape& shape) {
    if (data.empty()) throw Error(ErrorCode::empty_dataset, "cannot evaluate on an empty dataset");
    check_shape(params, shape);

    std::vector<double> logits(shape.class_count);
    double loss = 0.0;
    std::size_t correct = 0;
    for (const auto& sample : data.samples) {
        const double lse = class_logits(params, sample, shape, logits);
        loss += lse - logits[static_cast<std::size_t>(sample.label)];
        // max_element returns the first maximum: ties go to the lowest class.
        const auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
        if (best == sample.label) ++correct;
    }
    const auto n = static_cast<double>(data.size());
    return {std::max(0.0, loss / n), static_cast<double>(correct) / n, data.size()};
}

ParameterVector centralized_train(const Dataset& all_data, const ModelShape& shape, int rounds, int steps,
                                  double lr) {
    if (all_data.empty()) throw Error(ErrorCode::empty_dataset, "centralized training needs data");
    return local_update(init_model(shape.feature_dim, shape.class_count), all_data, shape, rounds * steps, lr)
        .params;
}

Partition generate_partitions(const PartitionSpec& spec, std::uint64_t seed) {
    if (spec.device_count == 0 || spec.samples_per_device == 0 || spec.feature_dim == 0)
        throw Error(ErrorCode::invalid_config, "partition counts must be positive");
    if (spec.class_count < 2) throw Error(ErrorCode::invalid_config, "class_count must be at least 2");
    if (!(spec.dirichlet_alpha > 0.0)) throw Error(ErrorCode::invalid_config, "dirichlet_alpha must be positive");

    std::mt19937_64 mean_rng(derive_seed(seed, 1));
    std::normal_distribution<double> mean_dist(0.0, spec.class_separation);
    std::vector<std::vector<double>> means(spec.class_count, std::vector<double>(spec.feature_dim));
    for (auto& m : means)
        for (auto& v : m) v = mean_dist(mean_rng);

    Partition out;
    out.devices.reserve(spec.device_count);
    for (std::size_t i = 0; i < spec.device_count; ++i) {
        std::mt19937_64 rng(derive_seed(seed, 2, i));
        std::gamma_distribution<double> gamma(spec.dirichlet_alpha, 1.0);
        std::vector<double> mix(spec.class_count);
        double total = 0.0;
        for (auto& p : mix) total += (p = gamma(rng));
        if (total > 0.0) {
            for (auto& p : mix) p /= total;
        } else {
            // Every gamma draw underflowed (tiny alpha): all mass on one class.
            std::uniform_int_distribution<std::size_t> pick(0, spec.class_count - 1);
            mix[pick(rng)] = 1.0;
        }
        auto data = draw_samples(means, largest_remainder(mix, spec.samples_per_device), rng);
        data.owner = NodeId{static_cast<std::uint32_t>(i)};
        out.devices.push_back(std::move(data));
    }

    std::mt19937_64 test_rng(derive_seed(seed, 3));
    const std::vector<double> uniform(spec.class_count, 1.0 / static_cast<double>(spec.class_count));
    out.test = draw_samples(means, largest_remainder(uniform, spec.test_samples), test_rng);
    return out;
}

std::vector<std::size_t> label_histogram(const Dataset& data, std::size_t class_count) {
    std::vector<std::size_t> hist(class_count);
    for (const auto& s : data.samples) {
        if (s.label < 0 || static_cast<std::size_t>(s.label) >= class_count)
            throw Error(ErrorCode::invalid_argument, fmt::format("label {} outside [0, {})", s.label, class_count));
        ++hist[static_cast<std::size_t>(s.label)];
    }
    return hist;
}

double distribution_similarity(const Dataset& local, const Dataset& global, std::size_t class_count) {
    if (local.empty() || global.empty())
        throw Error(ErrorCode::empty_dataset, "distribution similarity needs two nonempty datasets");
    const auto a = label_histogram(local, class_count);
    const auto b = label_histogram(global, class_count);
    const auto na = static_cast<double>(local.size());
    const auto nb = static_cast<double>(global.size());
    double tv = 0.0;
    for (std::size_t c = 0; c < class_count; ++c)
        tv += std::abs(static_cast<double>(a[c]) / na - static_cast<double>(b[c]) / nb);
    return std::clamp(1.0 - 0.5 * tv, 0.0, 1.0);
}

Dataset pool(std::span<const Dataset> parts) {
    Dataset out;
    for (const auto& p : parts) out.samples.insert(out.samples.end(), p.samples.begin(), p.samples.end());
    return out;
}

}  // namespace fog
