#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fog/config.hpp"
#include "fog/simulation.hpp"

namespace fog {

/// "# config_hash=<hash> seed=<seed>"; the first line of every output file.
std::string provenance_header(const SimulationConfig& config);

/// 17 significant digits, so equal doubles always print identically.
std::string format_number(double value);

std::string metrics_csv(const SimulationConfig& config, const std::vector<MetricsRow>& rows);
std::string events_log(const SimulationConfig& config, const std::vector<Event>& events);
std::string run_summary(const SimulationConfig& config, const SimulationResult& result);

/// Per-round uplink parameters sent by devices (layer 0) only.
std::vector<std::uint64_t> device_uplink_by_round(const SimulationResult& result);
/// Joules spent by devices on uplink and D2D transmissions, excluding compute.
double device_transmit_energy(const SimulationResult& result);

struct CompareRow {
    int round = 0;
    double fog_accuracy = 0.0;
    double star_accuracy = 0.0;
    double central_accuracy = 0.0;
    std::uint64_t fog_device_uplink = 0;
    std::uint64_t star_device_uplink = 0;
    double uplink_ratio = 0.0;  // star / fog; 0 when fog sent nothing that round
    double accuracy_gap = 0.0;  // central - fog
};

struct Comparison {
    std::vector<CompareRow> rows;
    double accuracy_gap = 0.0;
    double uplink_reduction = 0.0;  // star device uplink / fog device uplink
    double energy_reduction = 0.0;  // star device transmit energy / fog's
    double fog_device_energy = 0.0;
    double star_device_energy = 0.0;
};

Comparison compare_results(const SimulationResult& fog, const SimulationResult& star,
                           const SimulationResult& central);

std::string compare_csv(const SimulationConfig& config, const Comparison& comparison);
std::string compare_summary(const SimulationConfig& config, const Comparison& comparison);

}  // namespace fog
