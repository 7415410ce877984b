#include "fog/report.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace fog {

std::string provenance_header(const SimulationConfig& config) {
    return fmt::format("# config_hash={} seed={}\n", config_hash(config), config.seed);
}

std::string format_number(double value) { return fmt::format("{:.17g}", value); }

std::string metrics_csv(const SimulationConfig& config, const std::vector<MetricsRow>& rows) {
    std::string out = provenance_header(config);
    out += "round,global_loss,global_accuracy,uplink_params,downlink_params,d2d_params,total_energy_j,"
           "round_delay_s,stragglers_dropped,clusters_sampled,samples_moved\n";
    for (const auto& r : rows)
        out += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", r.round, format_number(r.global_loss),
                           format_number(r.global_accuracy), r.uplink_params, r.downlink_params, r.d2d_params,
                           format_number(r.total_energy_j), format_number(r.round_delay_s), r.stragglers_dropped,
                           r.clusters_sampled, r.samples_moved);
    return out;
}

std::string events_log(const SimulationConfig& config, const std::vector<Event>& events) {
    std::string out = provenance_header(config);
    for (const auto& e : events) {
        out += format_event(e);
        out += '\n';
    }
    return out;
}

std::string run_summary(const SimulationConfig& config, const SimulationResult& result) {
    std::string out = provenance_header(config);
    const auto& last = result.rows.back();
    const auto& ledger = result.ledger;
    double delay = 0.0;
    for (const auto& r : result.rows) delay += r.round_delay_s;
    out += fmt::format("rounds={}\n", config.training.global_rounds);
    out += fmt::format("devices={}\n", result.device_count);
    out += fmt::format("final_accuracy={}\n", format_number(last.global_accuracy));
    out += fmt::format("final_loss={}\n", format_number(last.global_loss));
    out += fmt::format("uplink_params={}\n", ledger.uplink_params());
    out += fmt::format("downlink_params={}\n", ledger.downlink_params());
    out += fmt::format("d2d_params={}\n", ledger.d2d_params());
    out += fmt::format("total_energy_j={}\n", format_number(ledger.total_energy()));
    out += fmt::format("device_transmit_energy_j={}\n", format_number(device_transmit_energy(result)));
    out += fmt::format("total_delay_s={}\n", format_number(delay));
    out += fmt::format("stragglers_dropped={}\n", ledger.stragglers_dropped());
    out += fmt::format("samples_moved={}\n", ledger.data_samples_moved());
    out += fmt::format("samples_lost={}\n", ledger.samples_lost());
    out += fmt::format("final_consensus_error={}\n",
                       format_number(result.consensus_error.empty() ? 0.0 : result.consensus_error.back()));
    return out;
}

namespace {

bool from_device(const SimulationResult& result, const Event& e) { return e.src.value < result.device_count; }

}  // namespace

std::vector<std::uint64_t> device_uplink_by_round(const SimulationResult& result) {
    std::vector<std::uint64_t> out(result.rows.size(), 0);
    if (result.rows.empty()) return out;
    const int first = result.rows.front().round;
    for (const auto& e : result.events)
        if (e.kind == EventKind::uplink && from_device(result, e)) out.at(static_cast<std::size_t>(e.round - first)) += e.params;
    return out;
}

double device_transmit_energy(const SimulationResult& result) {
    double total = 0.0;
    for (const auto& e : result.events)
        if ((e.kind == EventKind::uplink || e.kind == EventKind::d2d) && from_device(result, e)) total += e.joules;
    return total;
}

Comparison compare_results(const SimulationResult& fog, const SimulationResult& star,
                           const SimulationResult& central) {
    Comparison c;
    const auto fog_up = device_uplink_by_round(fog);
    const auto star_up = device_uplink_by_round(star);
    const auto n = std::min({fog.rows.size(), star.rows.size(), central.rows.size()});
    std::uint64_t fog_total = 0, star_total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        CompareRow r;
        r.round = fog.rows[i].round;
        r.fog_accuracy = fog.rows[i].global_accuracy;
        r.star_accuracy = star.rows[i].global_accuracy;
        r.central_accuracy = central.rows[i].global_accuracy;
        r.fog_device_uplink = fog_up[i];
        r.star_device_uplink = star_up[i];
        r.uplink_ratio = fog_up[i] == 0 ? 0.0 : static_cast<double>(star_up[i]) / static_cast<double>(fog_up[i]);
        r.accuracy_gap = r.central_accuracy - r.fog_accuracy;
        fog_total += fog_up[i];
        star_total += star_up[i];
        c.rows.push_back(r);
    }
    c.accuracy_gap = c.rows.empty() ? 0.0 : c.rows.back().accuracy_gap;
    c.uplink_reduction = fog_total == 0 ? 0.0 : static_cast<double>(star_total) / static_cast<double>(fog_total);
    c.fog_device_energy = device_transmit_energy(fog);
    c.star_device_energy = device_transmit_energy(star);
    c.energy_reduction = c.fog_device_energy > 0.0 ? c.star_device_energy / c.fog_device_energy : 0.0;
    return c;
}

std::string compare_csv(const SimulationConfig& config, const Comparison& comparison) {
    std::string out = provenance_header(config);
    out += "round,fog_accuracy,star_accuracy,central_accuracy,fog_device_uplink,star_device_uplink,uplink_ratio,"
           "accuracy_gap\n";
    for (const auto& r : comparison.rows)
        out += fmt::format("{},{},{},{},{},{},{},{}\n", r.round, format_number(r.fog_accuracy),
                           format_number(r.star_accuracy), format_number(r.central_accuracy), r.fog_device_uplink,
                           r.star_device_uplink, format_number(r.uplink_ratio), format_number(r.accuracy_gap));
    return out;
}

std::string compare_summary(const SimulationConfig& config, const Comparison& comparison) {
    std::string out = provenance_header(config);
    out += fmt::format("accuracy_gap={}\n", format_number(comparison.accuracy_gap));
    out += fmt::format("uplink_reduction_factor={}\n", format_number(comparison.uplink_reduction));
    out += fmt::format("energy_reduction_factor={}\n", format_number(comparison.energy_reduction));
    out += fmt::format("fog_device_transmit_energy_j={}\n", format_number(comparison.fog_device_energy));
    out += fmt::format("star_device_transmit_energy_j={}\n", format_number(comparison.star_device_energy));
    return out;
}

}  // namespace fog
