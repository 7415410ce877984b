#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fog/model.hpp"
#include "fog/types.hpp"

namespace fog {

enum class LinkKind { uplink, downlink, d2d };

struct LinkModel {
    double rate = 1.0;              // parameters / second
    double energy_per_param = 0.0;  // joules / parameter
    double noise_sigma = 0.0;
    LinkKind kind = LinkKind::uplink;
};

/// Simulator defaults, not measured values: uplink 10 J/kparam, D2D 1 J/kparam,
/// downlink 5 J/kparam; D2D runs five times faster than the uplink.
struct CostModel {
    LinkModel uplink{1.0e5, 0.010, 0.0, LinkKind::uplink};
    LinkModel downlink{1.0e5, 0.005, 0.0, LinkKind::downlink};
    LinkModel d2d{5.0e5, 0.001, 0.0, LinkKind::d2d};

    [[nodiscard]] const LinkModel& link(LinkKind kind) const;
};

/// A protocol-level transfer before it is costed.
struct ClusterTransfer {
    LinkKind kind = LinkKind::uplink;
    NodeId src{};
    NodeId dst{};
    std::uint64_t params = 0;
};

struct ComputeProfile {
    double samples_per_second = 1.0e4;
    double energy_per_sample_step = 1.0e-5;  // joules
};

struct TransmissionCost {
    double delay = 0.0;   // seconds
    double energy = 0.0;  // joules
};

TransmissionCost transmission_cost(std::uint64_t param_count, const LinkModel& link);

/// steps * sample_count / samples_per_second.
double compute_delay(const ComputeProfile& profile, std::size_t sample_count, int steps);

double compute_energy(const ComputeProfile& profile, std::size_t sample_count, int steps);

struct StragglerOutcome {
    std::vector<NodeId> participants;
    std::vector<NodeId> dropped;
};

/// Devices whose delay exceeds the deadline sit this round out.
StragglerOutcome apply_straggler_policy(const std::map<NodeId, double>& delays, double deadline);

/// Adds i.i.d. N(0, sigma^2) to every coordinate.
ParameterVector apply_channel_noise(const ParameterVector& vector, double sigma, std::uint64_t seed);

enum class EventKind {
    compute,       // local training work; joules and seconds only
    uplink,        // transfer to the layer above
    downlink,      // transfer to the layer below
    d2d,           // horizontal transfer inside a cluster
    drop,          // straggler dropped from the round
    stale,         // cluster with no finished device reused its previous aggregate
    sampled,       // leaf cluster selected this round; src = cluster parent
    samples_moved, // params = number of samples offloaded or handed over
    data_loss,     // params = number of samples lost on departure
    migrate,
    depart,
    round_end,     // seconds = round delay on the critical path
};

enum class Phase { mobility, sampling, cache, offload, local, straggler, aggregate, vertical, broadcast, evaluate };

std::string_view to_string(EventKind kind);
std::string_view to_string(Phase phase);
std::optional<EventKind> parse_event_kind(std::string_view text);
std::optional<Phase> parse_phase(std::string_view text);

/// One line of events.log.
struct Event {
    int round = 0;
    Phase phase = Phase::local;
    EventKind kind = EventKind::compute;
    NodeId src{};
    NodeId dst{};
    std::uint64_t params = 0;
    double joules = 0.0;
    double seconds = 0.0;

    bool operator==(const Event&) const = default;
};

/// Per-round counters reconstructed from events; the unit of MetricsRow.
struct RoundTotals {
    std::uint64_t uplink_params = 0;
    std::uint64_t downlink_params = 0;
    std::uint64_t d2d_params = 0;
    double energy_joules = 0.0;
    double round_delay_seconds = 0.0;
    std::uint64_t stragglers_dropped = 0;
    std::uint64_t clusters_sampled = 0;
    std::uint64_t samples_moved = 0;
    std::uint64_t samples_lost = 0;

    void add(const Event& event);
};

/// Cumulative accounting for one simulation. Every event passes through
/// record() exactly once.
class Ledgers {
public:
    void record(const Event& event);

    [[nodiscard]] std::uint64_t uplink_params() const noexcept { return totals_.uplink_params; }
    [[nodiscard]] std::uint64_t downlink_params() const noexcept { return totals_.downlink_params; }
    [[nodiscard]] std::uint64_t d2d_params() const noexcept { return totals_.d2d_params; }
    [[nodiscard]] std::uint64_t stragglers_dropped() const noexcept { return totals_.stragglers_dropped; }
    [[nodiscard]] std::uint64_t data_samples_moved() const noexcept { return totals_.samples_moved; }
    [[nodiscard]] std::uint64_t samples_lost() const noexcept { return totals_.samples_lost; }
    [[nodiscard]] double total_energy() const noexcept { return totals_.energy_joules; }
    [[nodiscard]] double energy(NodeId node) const;
    [[nodiscard]] const std::map<NodeId, double>& energy_by_node() const noexcept { return energy_; }
    [[nodiscard]] const std::vector<double>& round_delays() const noexcept { return round_delays_; }
    [[nodiscard]] const RoundTotals& totals() const noexcept { return totals_; }

private:
    RoundTotals totals_;
    std::map<NodeId, double> energy_;
    std::vector<double> round_delays_;
};

/// Costs a transfer of `params` over `link` into an event charged to `src`.
Event transfer_event(int round, Phase phase, NodeId src, NodeId dst, std::uint64_t params, const LinkModel& link);

std::string format_event(const Event& event);
Event parse_event(std::string_view line);

}  // namespace fog
