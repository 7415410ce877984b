#include "fog/netmodel.hpp"

#include <array>
#include <charconv>
#include <random>

#include <fmt/format.h>

#include "fog/error.hpp"

namespace fog {

const LinkModel& CostModel::link(LinkKind kind) const {
    switch (kind) {
        case LinkKind::uplink: return uplink;
        case LinkKind::downlink: return downlink;
        case LinkKind::d2d: return d2d;
    }
    return uplink;
}

TransmissionCost transmission_cost(std::uint64_t param_count, const LinkModel& link) {
    const auto n = static_cast<double>(param_count);
    return {n / link.rate, n * link.energy_per_param};
}

double compute_delay(const ComputeProfile& profile, std::size_t sample_count, int steps) {
    return static_cast<double>(steps) * static_cast<double>(sample_count) / profile.samples_per_second;
}

double compute_energy(const ComputeProfile& profile, std::size_t sample_count, int steps) {
    return static_cast<double>(steps) * static_cast<double>(sample_count) * profile.energy_per_sample_step;
}

StragglerOutcome apply_straggler_policy(const std::map<NodeId, double>& delays, double deadline) {
    if (!(deadline > 0.0)) throw Error(ErrorCode::invalid_argument, "deadline must be positive");
    StragglerOutcome out;
    for (const auto& [node, delay] : delays) (delay <= deadline ? out.participants : out.dropped).push_back(node);
    return out;
}

ParameterVector apply_channel_noise(const ParameterVector& vector, double sigma, std::uint64_t seed) {
    if (sigma < 0.0) throw Error(ErrorCode::invalid_argument, "noise sigma must be nonnegative");
    if (sigma == 0.0) return vector;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    ParameterVector out = vector;
    for (auto& v : out.values()) v += noise(rng);
    return out;
}

namespace {

constexpr std::array kEventKindNames{
    std::pair{EventKind::compute, std::string_view{"compute"}},
    std::pair{EventKind::uplink, std::string_view{"uplink"}},
    std::pair{EventKind::downlink, std::string_view{"downlink"}},
    std::pair{EventKind::d2d, std::string_view{"d2d"}},
    std::pair{EventKind::drop, std::string_view{"drop"}},
    std::pair{EventKind::stale, std::string_view{"stale"}},
    std::pair{EventKind::sampled, std::string_view{"sampled"}},
    std::pair{EventKind::samples_moved, std::string_view{"samples_moved"}},
    std::pair{EventKind::data_loss, std::string_view{"data_loss"}},
    std::pair{EventKind::migrate, std::string_view{"migrate"}},
    std::pair{EventKind::depart, std::string_view{"depart"}},
    std::pair{EventKind::round_end, std::string_view{"round_end"}},
};

constexpr std::array kPhaseNames{
    std::pair{Phase::mobility, std::string_view{"mobility"}},
    std::pair{Phase::sampling, std::string_view{"sampling"}},
    std::pair{Phase::cache, std::string_view{"cache"}},
    std::pair{Phase::offload, std::string_view{"offload"}},
    std::pair{Phase::local, std::string_view{"local"}},
    std::pair{Phase::straggler, std::string_view{"straggler"}},
    std::pair{Phase::aggregate, std::string_view{"aggregate"}},
    std::pair{Phase::vertical, std::string_view{"vertical"}},
    std::pair{Phase::broadcast, std::string_view{"broadcast"}},
    std::pair{Phase::evaluate, std::string_view{"evaluate"}},
};

template <typename Table, typename Enum>
std::string_view lookup_name(const Table& table, Enum value) {
    for (const auto& [v, name] : table)
        if (v == value) return name;
    return "?";
}

template <typename Enum, typename Table>
std::optional<Enum> lookup_value(const Table& table, std::string_view text) {
    for (const auto& [v, name] : table)
        if (name == text) return v;
    return std::nullopt;
}

template <typename T>
T parse_number(std::string_view field, std::string_view line) {
    T value{};
    const auto* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec != std::errc{} || ptr != end)
        throw Error(ErrorCode::invalid_argument, fmt::format("malformed event line: {}", line));
    return value;
}

}  // namespace

std::string_view to_string(EventKind kind) { return lookup_name(kEventKindNames, kind); }
std::string_view to_string(Phase phase) { return lookup_name(kPhaseNames, phase); }
std::optional<EventKind> parse_event_kind(std::string_view text) { return lookup_value<EventKind>(kEventKindNames, text); }
std::optional<Phase> parse_phase(std::string_view text) { return lookup_value<Phase>(kPhaseNames, text); }

void RoundTotals::add(const Event& event) {
    energy_joules += event.joules;
    switch (event.kind) {
        case EventKind::uplink: uplink_params += event.params; break;
        case EventKind::downlink: downlink_params += event.params; break;
        case EventKind::d2d: d2d_params += event.params; break;
        case EventKind::drop: ++stragglers_dropped; break;
        case EventKind::sampled: ++clusters_sampled; break;
        case EventKind::samples_moved: samples_moved += event.params; break;
        case EventKind::data_loss: samples_lost += event.params; break;
        case EventKind::round_end: round_delay_seconds = event.seconds; break;
        default: break;
    }
}

void Ledgers::record(const Event& event) {
    totals_.add(event);
    if (event.joules != 0.0) energy_[event.src] += event.joules;
    if (event.kind == EventKind::round_end) round_delays_.push_back(event.seconds);
}

double Ledgers::energy(NodeId node) const {
    const auto it = energy_.find(node);
    return it == energy_.end() ? 0.0 : it->second;
}

Event transfer_event(int round, Phase phase, NodeId src, NodeId dst, std::uint64_t params, const LinkModel& link) {
    const auto cost = transmission_cost(params, link);
    EventKind kind = EventKind::uplink;
    if (link.kind == LinkKind::downlink) kind = EventKind::downlink;
    if (link.kind == LinkKind::d2d) kind = EventKind::d2d;
    return {round, phase, kind, src, dst, params, cost.energy, cost.delay};
}

std::string format_event(const Event& e) {
    return fmt::format("{},{},{},{},{},{},{:.17g},{:.17g}", e.round, to_string(e.phase), to_string(e.kind),
                       e.src.value, e.dst.value, e.params, e.joules, e.seconds);
}

Event parse_event(std::string_view line) {
    std::array<std::string_view, 8> fields;
    std::size_t start = 0;
    for (std::size_t f = 0; f < fields.size(); ++f) {
        const auto comma = line.find(',', start);
        if ((comma == std::string_view::npos) != (f + 1 == fields.size()))
            throw Error(ErrorCode::invalid_argument, fmt::format("malformed event line: {}", line));
        fields[f] = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        start = comma + 1;
    }
    const auto phase = parse_phase(fields[1]);
    const auto kind = parse_event_kind(fields[2]);
    if (!phase || !kind) throw Error(ErrorCode::invalid_argument, fmt::format("malformed event line: {}", line));
    return {parse_number<int>(fields[0], line),
            *phase,
            *kind,
            NodeId{parse_number<std::uint32_t>(fields[3], line)},
            NodeId{parse_number<std::uint32_t>(fields[4], line)},
            parse_number<std::uint64_t>(fields[5], line),
            parse_number<double>(fields[6], line),
            parse_number<double>(fields[7], line)};
}

}  // namespace fog
