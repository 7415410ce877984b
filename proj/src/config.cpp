#include "fog/config.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

namespace fog {

using nlohmann::json;

namespace {

class Reader {
public:
    Reader(const json* obj, std::string path, std::vector<std::string>& violations,
           std::initializer_list<std::string_view> allowed)
        : obj_(obj), path_(std::move(path)), v_(violations) {
        if (obj_ == nullptr) return;
        if (!obj_->is_object()) {
            v_.push_back(fmt::format("{}: expected an object", path_));
            obj_ = nullptr;
            return;
        }
        const std::set<std::string_view> keys(allowed);
        for (const auto& [key, value] : obj_->items())
            if (!keys.contains(key)) v_.push_back(fmt::format("{}: unknown key", name(key)));
    }

    [[nodiscard]] std::string name(std::string_view key) const {
        return path_.empty() ? std::string(key) : fmt::format("{}.{}", path_, key);
    }

    [[nodiscard]] const json* child(std::string_view key) const {
        if (obj_ == nullptr) return nullptr;
        const auto it = obj_->find(key);
        return it == obj_->end() || it->is_null() ? nullptr : &*it;
    }

    template <typename T>
    void get(std::string_view key, T& out) const {
        const auto* j = child(key);
        if (j == nullptr) return;
        if constexpr (std::is_same_v<T, bool>) {
            if (!j->is_boolean()) return type_error(key, "a boolean");
        } else if constexpr (std::is_integral_v<T>) {
            if (!j->is_number_integer()) return type_error(key, "an integer");
            if constexpr (std::is_unsigned_v<T>)
                if (j->get<std::int64_t>() < 0) return type_error(key, "a nonnegative integer");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!j->is_number()) return type_error(key, "a number");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!j->is_string()) return type_error(key, "a string");
        }
        out = j->get<T>();
    }

    template <typename T>
    void get_optional(std::string_view key, std::optional<T>& out) const {
        if (child(key) == nullptr) return;
        T value{};
        const auto before = v_.size();
        get(key, value);
        if (v_.size() == before) out = value;
    }

private:
    void type_error(std::string_view key, std::string_view expected) const {
        v_.push_back(fmt::format("{}: expected {}", name(key), expected));
    }

    const json* obj_;
    std::string path_;
    std::vector<std::string>& v_;
};

void read_link(const Reader& parent, std::string_view key, LinkModel& link, std::vector<std::string>& v) {
    Reader r(parent.child(key), parent.name(key), v, {"rate", "energy_per_param", "noise_sigma"});
    r.get("rate", link.rate);
    r.get("energy_per_param", link.energy_per_param);
    r.get("noise_sigma", link.noise_sigma);
}

std::string_view d2d_name(D2DKind kind) {
    switch (kind) {
        case D2DKind::none: return "none";
        case D2DKind::complete: return "complete";
        case D2DKind::random: return "random";
        case D2DKind::ring: return "ring";
    }
    return "none";
}

}  // namespace

ConfigParse parse_config(const json& doc) {
    ConfigParse out;
    auto& c = out.config;
    auto& v = out.violations;

    Reader top(&doc, "", v,
               {"seed", "data", "layers", "training", "consensus", "compression", "sampling_fraction",
                "continue_unsampled", "blocks", "mobility", "offloading", "cache_fraction", "compute", "deadline_s",
                "costs", "battery_j", "baselines"});
    top.get("seed", c.seed);
    top.get("sampling_fraction", c.sampling_fraction);
    top.get("continue_unsampled", c.continue_unsampled);
    top.get("cache_fraction", c.cache_fraction);
    top.get("battery_j", c.battery_j);
    top.get_optional("deadline_s", c.deadline);

    {
        Reader r(top.child("data"), "data", v,
                 {"samples_per_device", "feature_dim", "classes", "dirichlet_alpha", "test_samples",
                  "class_separation"});
        r.get("samples_per_device", c.data.samples_per_device);
        r.get("feature_dim", c.data.feature_dim);
        r.get("classes", c.data.classes);
        r.get("dirichlet_alpha", c.data.dirichlet_alpha);
        r.get("test_samples", c.data.test_samples);
        r.get("class_separation", c.data.class_separation);
    }

    if (const auto* layers = top.child("layers"); layers == nullptr || !layers->is_array()) {
        v.emplace_back("layers: expected an array of layer objects");
    } else {
        for (std::size_t i = 0; i < layers->size(); ++i) {
            const auto path = fmt::format("layers[{}]", i);
            Reader r(&(*layers)[i], path, v, {"nodes", "cluster_size", "d2d", "edge_probability", "mode"});
            LayerSpec spec;
            r.get("nodes", spec.node_count);
            r.get("cluster_size", spec.cluster_size);
            r.get("edge_probability", spec.d2d.edge_probability);
            std::string d2d = "none";
            r.get("d2d", d2d);
            if (d2d == "none") spec.d2d.kind = D2DKind::none;
            else if (d2d == "complete") spec.d2d.kind = D2DKind::complete;
            else if (d2d == "ring") spec.d2d.kind = D2DKind::ring;
            else if (d2d == "random") spec.d2d.kind = D2DKind::random;
            else v.push_back(fmt::format("{}.d2d: unknown model '{}'", path, d2d));
            std::string mode = "server_side";
            r.get("mode", mode);
            if (mode == "d2d_consensus") spec.d2d_enabled = true;
            else if (mode != "server_side") v.push_back(fmt::format("{}.mode: unknown mode '{}'", path, mode));
            c.layers.push_back(spec);
        }
    }

    {
        Reader r(top.child("training"), "training", v, {"global_rounds", "local_steps", "lr"});
        r.get("global_rounds", c.training.global_rounds);
        r.get("local_steps", c.training.local_steps);
        r.get("lr", c.training.lr);
    }
    {
        Reader r(top.child("consensus"), "consensus", v, {"rounds", "sigma"});
        r.get("rounds", c.consensus.rounds);
        r.get("sigma", c.consensus.sigma);
    }
    {
        Reader r(top.child("compression"), "compression", v, {"quantize_bits", "topk"});
        r.get_optional("quantize_bits", c.compression.quantize_bits);
        r.get_optional("topk", c.compression.topk);
    }
    {
        Reader r(top.child("blocks"), "blocks", v, {"layer", "vertical_period", "intra_rounds", "periods"});
        r.get("layer", c.blocks.layer);
        r.get("vertical_period", c.blocks.vertical_period);
        r.get("intra_rounds", c.blocks.intra_rounds);
        if (const auto* p = r.child("periods")) {
            if (!p->is_array()) v.emplace_back("blocks.periods: expected an array of integers");
            else
                for (const auto& e : *p) {
                    if (e.is_number_integer()) c.blocks.periods.push_back(e.get<int>());
                    else v.emplace_back("blocks.periods: expected an array of integers");
                }
        }
    }
    {
        Reader r(top.child("mobility"), "mobility", v, {"rate", "depart_probability", "handover_probability"});
        r.get("rate", c.mobility.events_per_round);
        r.get("depart_probability", c.mobility.depart_probability);
        r.get("handover_probability", c.mobility.handover_probability);
    }
    {
        Reader r(top.child("offloading"), "offloading", v, {"enabled", "trust_density"});
        r.get("enabled", c.offloading.enabled);
        r.get("trust_density", c.offloading.trust_density);
    }
    {
        Reader r(top.child("compute"), "compute", v,
                 {"samples_per_second", "energy_per_sample_step", "slow_fraction", "slow_factor"});
        r.get("samples_per_second", c.compute.samples_per_second);
        r.get("energy_per_sample_step", c.compute.energy_per_sample_step);
        r.get("slow_fraction", c.compute.slow_fraction);
        r.get("slow_factor", c.compute.slow_factor);
    }
    {
        Reader r(top.child("costs"), "costs", v, {"uplink", "downlink", "d2d"});
        read_link(r, "uplink", c.costs.uplink, v);
        read_link(r, "downlink", c.costs.downlink, v);
        read_link(r, "d2d", c.costs.d2d, v);
    }
    {
        Reader r(top.child("baselines"), "baselines", v, {"star", "centralized"});
        r.get("star", c.baselines.star);
        r.get("centralized", c.baselines.centralized);
    }

    if (v.empty()) {
        const auto semantic = c.validate();
        v.insert(v.end(), semantic.begin(), semantic.end());
    }
    return out;
}

ConfigParse load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        ConfigParse out;
        out.violations.push_back(fmt::format("cannot read config file '{}'", path));
        return out;
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        ConfigParse out;
        out.violations.push_back(fmt::format("{}: {}", path, e.what()));
        return out;
    }
    return parse_config(doc);
}

std::vector<std::string> SimulationConfig::validate() const {
    std::vector<std::string> v;
    const auto need = [&v](bool ok, std::string message) {
        if (!ok) v.push_back(std::move(message));
    };

    need(layers.size() >= 2, "layers: need at least two layers (devices and root)");
    if (!layers.empty()) need(layers.back().node_count == 1, "layers: the last layer must hold exactly one root node");
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
        const auto& s = layers[l];
        need(s.node_count >= 1, fmt::format("layers[{}].nodes must be at least 1", l));
        need(s.cluster_size >= 1, fmt::format("layers[{}].cluster_size must be at least 1", l));
        if (s.node_count >= 1 && s.cluster_size >= 1) {
            const auto clusters = (s.node_count + s.cluster_size - 1) / s.cluster_size;
            need(clusters >= layers[l + 1].node_count,
                 fmt::format("layers[{}] forms {} clusters but layers[{}] has {} nodes; every upper node needs a cluster",
                             l, clusters, l + 1, layers[l + 1].node_count));
        }
        if (s.d2d_enabled)
            need(s.d2d.kind != D2DKind::none || s.cluster_size == 1,
                 fmt::format("layers[{}]: d2d_consensus needs a D2D model other than none", l));
        if (s.d2d.kind == D2DKind::random)
            need(s.d2d.edge_probability > 0.0 && s.d2d.edge_probability <= 1.0,
                 fmt::format("layers[{}].edge_probability must be in (0, 1]", l));
    }

    need(data.samples_per_device >= 1, "data.samples_per_device must be at least 1");
    need(data.feature_dim >= 1, "data.feature_dim must be at least 1");
    need(data.classes >= 2, "data.classes must be at least 2");
    need(data.dirichlet_alpha > 0.0, "data.dirichlet_alpha must be positive");
    need(data.test_samples >= 1, "data.test_samples must be at least 1");
    need(data.class_separation >= 0.0, "data.class_separation must be nonnegative");

    need(training.global_rounds >= 0, "training.global_rounds must be nonnegative");
    need(training.local_steps >= 0, "training.local_steps must be nonnegative");
    need(training.lr > 0.0, "training.lr must be positive");
    need(consensus.rounds >= 1, "consensus.rounds must be at least 1");
    need(consensus.sigma >= 0.0, "consensus.sigma must be nonnegative");

    if (compression.topk)
        need(*compression.topk >= 1 && *compression.topk <= parameter_count(),
             fmt::format("compression.topk must be in [1, {}]", parameter_count()));
    if (compression.quantize_bits)
        need(*compression.quantize_bits >= 1 && *compression.quantize_bits <= 52,
             "compression.quantize_bits must be in [1, 52]");

    need(sampling_fraction > 0.0 && sampling_fraction <= 1.0,
         fmt::format("sampling_fraction must be in (0, 1] (got {})", sampling_fraction));

    need(blocks.layer >= 1 && blocks.layer + 1 <= std::max<std::size_t>(layers.size(), 1),
         "blocks.layer must name a layer between 1 and the root layer");
    need(blocks.vertical_period >= 1, "blocks.vertical_period must be at least 1");
    need(blocks.intra_rounds >= 1, "blocks.intra_rounds must be at least 1");
    for (const auto p : blocks.periods) need(p >= 1, "blocks.periods entries must be at least 1");
    if (!blocks.periods.empty() && blocks.layer < layers.size())
        need(blocks.periods.size() == layers[blocks.layer].node_count,
             fmt::format("blocks.periods has {} entries for {} block heads", blocks.periods.size(),
                         layers[blocks.layer].node_count));

    need(mobility.events_per_round >= 0.0, "mobility.rate must be nonnegative");
    need(mobility.depart_probability >= 0.0 && mobility.depart_probability <= 1.0,
         "mobility.depart_probability must be in [0, 1]");
    need(mobility.handover_probability >= 0.0 && mobility.handover_probability <= 1.0,
         "mobility.handover_probability must be in [0, 1]");
    need(offloading.trust_density >= 0.0 && offloading.trust_density <= 1.0,
         "offloading.trust_density must be in [0, 1]");
    need(cache_fraction >= 0.0 && cache_fraction <= 1.0, "cache_fraction must be in [0, 1]");

    need(compute.samples_per_second > 0.0, "compute.samples_per_second must be positive");
    need(compute.energy_per_sample_step >= 0.0, "compute.energy_per_sample_step must be nonnegative");
    need(compute.slow_fraction >= 0.0 && compute.slow_fraction <= 1.0, "compute.slow_fraction must be in [0, 1]");
    need(compute.slow_factor >= 1.0, "compute.slow_factor must be at least 1");
    if (deadline) need(*deadline > 0.0, "deadline_s must be positive");

    for (const auto& [name, link] : {std::pair{"uplink", &costs.uplink}, std::pair{"downlink", &costs.downlink},
                                     std::pair{"d2d", &costs.d2d}}) {
        need(link->rate > 0.0, fmt::format("costs.{}.rate must be positive", name));
        need(link->energy_per_param >= 0.0, fmt::format("costs.{}.energy_per_param must be nonnegative", name));
        need(link->noise_sigma >= 0.0, fmt::format("costs.{}.noise_sigma must be nonnegative", name));
    }
    // D2D noise is consensus.sigma; a second knob for it would be ambiguous.
    need(costs.d2d.noise_sigma == 0.0, "costs.d2d.noise_sigma is not used; set consensus.sigma instead");
    need(battery_j >= 0.0, "battery_j must be nonnegative");
    return v;
}

json to_json(const SimulationConfig& c) {
    json layers = json::array();
    for (const auto& s : c.layers) {
        json l{{"nodes", s.node_count}, {"cluster_size", s.cluster_size}, {"d2d", d2d_name(s.d2d.kind)},
               {"mode", s.d2d_enabled ? "d2d_consensus" : "server_side"}};
        if (s.d2d.kind == D2DKind::random) l["edge_probability"] = s.d2d.edge_probability;
        layers.push_back(std::move(l));
    }
    const auto link = [](const LinkModel& m) {
        return json{{"rate", m.rate}, {"energy_per_param", m.energy_per_param}, {"noise_sigma", m.noise_sigma}};
    };
    json doc{
        {"seed", c.seed},
        {"data",
         {{"samples_per_device", c.data.samples_per_device},
          {"feature_dim", c.data.feature_dim},
          {"classes", c.data.classes},
          {"dirichlet_alpha", c.data.dirichlet_alpha},
          {"test_samples", c.data.test_samples},
          {"class_separation", c.data.class_separation}}},
        {"layers", layers},
        {"training",
         {{"global_rounds", c.training.global_rounds}, {"local_steps", c.training.local_steps}, {"lr", c.training.lr}}},
        {"consensus", {{"rounds", c.consensus.rounds}, {"sigma", c.consensus.sigma}}},
        {"compression",
         {{"quantize_bits", c.compression.quantize_bits ? json(*c.compression.quantize_bits) : json(nullptr)},
          {"topk", c.compression.topk ? json(*c.compression.topk) : json(nullptr)}}},
        {"sampling_fraction", c.sampling_fraction},
        {"continue_unsampled", c.continue_unsampled},
        {"blocks",
         {{"layer", c.blocks.layer},
          {"vertical_period", c.blocks.vertical_period},
          {"intra_rounds", c.blocks.intra_rounds},
          {"periods", c.blocks.periods}}},
        {"mobility",
         {{"rate", c.mobility.events_per_round},
          {"depart_probability", c.mobility.depart_probability},
          {"handover_probability", c.mobility.handover_probability}}},
        {"offloading", {{"enabled", c.offloading.enabled}, {"trust_density", c.offloading.trust_density}}},
        {"cache_fraction", c.cache_fraction},
        {"compute",
         {{"samples_per_second", c.compute.samples_per_second},
          {"energy_per_sample_step", c.compute.energy_per_sample_step},
          {"slow_fraction", c.compute.slow_fraction},
          {"slow_factor", c.compute.slow_factor}}},
        {"deadline_s", c.deadline ? json(*c.deadline) : json(nullptr)},
        {"costs", {{"uplink", link(c.costs.uplink)}, {"downlink", link(c.costs.downlink)}, {"d2d", link(c.costs.d2d)}}},
        {"battery_j", c.battery_j},
        {"baselines", {{"star", c.baselines.star}, {"centralized", c.baselines.centralized}}},
    };
    return doc;
}

std::string config_hash(const SimulationConfig& config) {
    const auto text = to_json(config).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", h);
}

}  // namespace fog
