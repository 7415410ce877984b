#pragma once
// Helpers shared by the unit tests and the acceptance binary.

#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "fog/error.hpp"
#include "fog/model.hpp"
#include "fog/topology.hpp"

namespace fog::test {

// The code of the fog::Error thrown by f, or nullopt if it returns normally.
template <typename F>
std::optional<ErrorCode> error_code(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

inline Dataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t d, std::size_t classes) {
    std::normal_distribution<double> gauss;
    std::uniform_int_distribution<int> label(0, static_cast<int>(classes) - 1);
    Dataset data;
    for (std::size_t i = 0; i < n; ++i) {
        Sample s;
        for (std::size_t j = 0; j < d; ++j) s.features.push_back(gauss(rng));
        s.label = label(rng);
        data.samples.push_back(std::move(s));
    }
    return data;
}

inline ParameterVector random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
    std::normal_distribution<double> gauss(0.0, scale);
    ParameterVector v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = gauss(rng);
    return v;
}

// Erdős–Rényi graph redrawn until connected.
inline Adjacency random_connected_graph(std::mt19937_64& rng, std::size_t n, double p) {
    std::bernoulli_distribution edge(p);
    while (true) {
        Adjacency a(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (edge(rng)) a.connect(i, j);
        if (a.is_connected()) return a;
    }
}

inline Cluster consensus_cluster(const Adjacency& graph) {
    Cluster c;
    c.mode = AggregationMode::d2d_consensus;
    c.d2d_model = {D2DKind::complete, 0.0};
    c.d2d = graph;
    for (std::uint32_t i = 0; i < graph.order(); ++i) c.members.push_back(NodeId{i});
    c.parent = NodeId{1000};
    return c;
}

// Plain softmax cross-entropy, written independently of the library.
inline double reference_loss(const ParameterVector& w, const Dataset& data, std::size_t d, std::size_t classes) {
    double total = 0.0;
    for (const auto& s : data.samples) {
        std::vector<double> z(classes, 0.0);
        for (std::size_t c = 0; c < classes; ++c)
            for (std::size_t j = 0; j < d; ++j) z[c] += w[c * d + j] * s.features[j];
        double m = z[0];
        for (const double v : z) m = std::max(m, v);
        double sum = 0.0;
        for (const double v : z) sum += std::exp(v - m);
        total += std::log(sum) + m - z[static_cast<std::size_t>(s.label)];
    }
    return total / static_cast<double>(data.size());
}

inline double norm(const ParameterVector& v) {
    double s = 0.0;
    for (const double x : v.values()) s += x * x;
    return std::sqrt(s);
}

}  // namespace fog::test
