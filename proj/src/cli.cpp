#include "fog/cli.hpp"

#include <array>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <regex>
#include <thread>

#include <fmt/format.h>

#include "fog/error.hpp"
#include "fog/report.hpp"
#include "fog/simulation.hpp"

namespace fog {

namespace fs = std::filesystem;
using nlohmann::json;

std::optional<Provenance> read_provenance(const std::string& line) {
    static const std::regex pattern(R"(^# config_hash=([0-9a-f]{16}) seeds?=(\S+)\s*$)");
    std::smatch m;
    if (!std::regex_match(line, m, pattern)) return std::nullopt;
    return Provenance{m[1], m[2]};
}

bool set_dotted(json& doc, const std::string& key, const json& value) {
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const auto part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (node->is_object()) {
            const auto it = node->find(part);
            if (it == node->end()) return false;
            node = &*it;
        } else if (node->is_array()) {
            if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos) return false;
            const auto index = std::stoul(part);
            if (index >= node->size()) return false;
            node = &(*node)[index];
        } else {
            return false;
        }
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    *node = value;
    return true;
}

namespace {

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::invalid_argument, fmt::format("cannot write '{}'", path.string()));
    out << text;
}

void write_manifest(const SimulationConfig& config, const RunManifest& m) {
    std::string text = provenance_header(config);
    text += fmt::format("config_hash={}\nseeds={}\nout_dir={}\nfiles={}\n", m.config_hash, fmt::join(m.seeds, ","),
                        m.out_dir, fmt::join(m.files, ","));
    write_file(fs::path(m.out_dir) / "manifest.txt", text);
}

// Loads and validates; prints every violation and returns nullopt on failure.
std::optional<SimulationConfig> load_checked(const std::string& path, std::optional<std::uint64_t> seed,
                                             std::ostream& err) {
    auto parsed = load_config(path);
    if (seed && parsed.violations.empty()) {
        parsed.config.seed = *seed;
    }
    if (!parsed.violations.empty()) {
        for (const auto& v : parsed.violations) err << "config error: " << v << '\n';
        return std::nullopt;
    }
    return parsed.config;
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const Error& e) {
        err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
        return e.code() == ErrorCode::invalid_config ? 2 : 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

// Values on the command line are JSON literals; bare words are taken as strings.
json parse_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return json(text);
    }
}

std::string file_token(const json& value) {
    auto text = value.is_string() ? value.get<std::string>() : value.dump();
    for (auto& ch : text)
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '.' && ch != '-') ch = '_';
    return text;
}

double final_consensus_error(const SimulationResult& r) {
    return r.consensus_error.empty() ? 0.0 : r.consensus_error.back();
}

}  // namespace

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out_dir,
            std::ostream& err) {
    const auto config = load_checked(config_path, seed, err);
    if (!config) return 2;
    return guarded(err, [&] {
        const auto result = run_simulation(*config);
        fs::create_directories(out_dir);
        const fs::path dir(out_dir);
        write_file(dir / "metrics.csv", metrics_csv(*config, result.rows));
        write_file(dir / "events.log", events_log(*config, result.events));
        write_file(dir / "summary.txt", run_summary(*config, result));
        write_manifest(*config, {config_hash(*config), {config->seed}, out_dir,
                                 {"metrics.csv", "events.log", "summary.txt"}});
        return 0;
    });
}

int cmd_compare(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out_dir,
                std::ostream& err) {
    const auto config = load_checked(config_path, seed, err);
    if (!config) return 2;
    return guarded(err, [&] {
        const auto fog = run_simulation(*config);
        const auto baselines = run_baselines(*config);
        const auto comparison = compare_results(fog, baselines.star, baselines.centralized);
        fs::create_directories(out_dir);
        const fs::path dir(out_dir);
        write_file(dir / "metrics.csv", metrics_csv(*config, fog.rows));
        write_file(dir / "events.log", events_log(*config, fog.events));
        write_file(dir / "compare.csv", compare_csv(*config, comparison));
        write_file(dir / "summary.txt", compare_summary(*config, comparison));
        write_manifest(*config, {config_hash(*config), {config->seed}, out_dir,
                                 {"metrics.csv", "events.log", "compare.csv", "summary.txt"}});
        return 0;
    });
}

int cmd_sweep(const std::string& config_path, const std::string& parameter, const std::vector<std::string>& values,
              const std::vector<std::uint64_t>& seeds, const std::string& out_dir, int parallel, std::ostream& err) {
    const auto base = load_checked(config_path, std::nullopt, err);
    if (!base) return 2;
    if (values.empty()) {
        err << "sweep: the value list is empty\n";
        return 2;
    }
    if (parallel < 1) {
        err << "sweep: --parallel must be at least 1\n";
        return 2;
    }
    const auto run_seeds = seeds.empty() ? std::vector<std::uint64_t>{base->seed} : seeds;

    struct Job {
        json value;
        std::uint64_t seed = 0;
        SimulationConfig config;
        SimulationResult result;
    };
    std::vector<Job> jobs;
    const auto canonical = to_json(*base);
    for (const auto& text : values) {
        const auto value = parse_value(text);
        for (const auto s : run_seeds) {
            auto doc = canonical;
            if (!set_dotted(doc, parameter, value)) {
                err << "sweep: unknown config key '" << parameter << "'\n";
                return 2;
            }
            doc["seed"] = s;
            auto parsed = parse_config(doc);
            if (!parsed.violations.empty()) {
                for (const auto& v : parsed.violations)
                    err << "config error (" << parameter << "=" << value.dump() << "): " << v << '\n';
                return 2;
            }
            jobs.push_back({value, s, std::move(parsed.config), {}});
        }
    }

    return guarded(err, [&] {
        const fs::path dir(out_dir);
        fs::create_directories(dir);
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        const auto worker = [&] {
            for (auto i = next++; i < jobs.size(); i = next++) {
                try {
                    auto& job = jobs[i];
                    job.result = run_simulation(job.config);
                    write_file(dir / fmt::format("metrics_{}_seed{}.csv", file_token(job.value), job.seed),
                               metrics_csv(job.config, job.result.rows));
                } catch (...) {
                    const std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        };
        {
            std::vector<std::jthread> pool;
            const auto threads = std::min<std::size_t>(static_cast<std::size_t>(parallel), jobs.size());
            for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
            worker();
        }
        if (failure) std::rethrow_exception(failure);

        std::string table = fmt::format("# config_hash={} seeds={}\n", config_hash(*base), fmt::join(run_seeds, ";"));
        table += fmt::format("{},runs,final_accuracy_mean,final_accuracy_std,final_loss_mean,final_loss_std,"
                             "uplink_params_mean,uplink_params_std,total_energy_j_mean,total_energy_j_std,"
                             "final_consensus_error_mean,final_consensus_error_std\n",
                             parameter);
        const auto per_value = run_seeds.size();
        for (std::size_t v = 0; v < values.size(); ++v) {
            std::vector<std::array<double, 5>> samples;
            for (std::size_t k = 0; k < per_value; ++k) {
                const auto& r = jobs[v * per_value + k].result;
                samples.push_back({r.rows.back().global_accuracy, r.rows.back().global_loss,
                                   static_cast<double>(r.ledger.uplink_params()), r.ledger.total_energy(),
                                   final_consensus_error(r)});
            }
            std::string line = fmt::format("{},{}", jobs[v * per_value].value.dump(), per_value);
            for (std::size_t m = 0; m < 5; ++m) {
                double mean = 0.0;
                for (const auto& s : samples) mean += s[m];
                mean /= static_cast<double>(samples.size());
                double var = 0.0;
                for (const auto& s : samples) var += (s[m] - mean) * (s[m] - mean);
                const double sd = samples.size() > 1 ? std::sqrt(var / static_cast<double>(samples.size() - 1)) : 0.0;
                line += fmt::format(",{},{}", format_number(mean), format_number(sd));
            }
            table += line + '\n';
        }
        write_file(dir / "sweep.csv", table);

        RunManifest manifest{config_hash(*base), run_seeds, out_dir, {"sweep.csv"}};
        for (const auto& job : jobs)
            manifest.files.push_back(fmt::format("metrics_{}_seed{}.csv", file_token(job.value), job.seed));
        write_manifest(*base, manifest);
        return 0;
    });
}

}  // namespace fog
