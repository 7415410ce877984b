#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fog {

enum class ErrorCode {
    invalid_config,
    empty_batch,
    empty_dataset,
    empty_input,
    negative_weight,
    zero_weight_sum,
    length_mismatch,
    dimension_mismatch,
    disconnected_graph,
    topology,
    unknown_node,
    cross_layer_migration,
    invalid_mode,
    stale_index,
    invalid_argument,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace fog
