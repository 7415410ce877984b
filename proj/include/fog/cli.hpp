#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fog/config.hpp"

namespace fog {

/// What a command wrote, and under which config. Serialized as manifest.txt.
struct RunManifest {
    std::string config_hash;
    std::vector<std::uint64_t> seeds;
    std::string out_dir;
    std::vector<std::string> files;
};

struct Provenance {
    std::string config_hash;
    std::string seed;
};

/// Parses a "# config_hash=... seed=..." header line.
std::optional<Provenance> read_provenance(const std::string& line);

/// Overrides one dotted key ("consensus.rounds", "layers.0.cluster_size") of
/// the canonical config document. Returns false if the key does not exist.
bool set_dotted(nlohmann::json& doc, const std::string& key, const nlohmann::json& value);

/// Exit codes: 0 success, 1 runtime failure, 2 invalid config or arguments.
int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out_dir,
            std::ostream& err);
int cmd_compare(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out_dir,
                std::ostream& err);
int cmd_sweep(const std::string& config_path, const std::string& parameter, const std::vector<std::string>& values,
              const std::vector<std::uint64_t>& seeds, const std::string& out_dir, int parallel, std::ostream& err);

}  // namespace fog
