#include "fog/error.hpp"

namespace fog {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_config: return "invalid-config";
        case ErrorCode::empty_batch: return "empty-batch";
        case ErrorCode::empty_dataset: return "empty-dataset";
        case ErrorCode::empty_input: return "empty-input";
        case ErrorCode::negative_weight: return "negative-weight";
        case ErrorCode::zero_weight_sum: return "zero-weight-sum";
        case ErrorCode::length_mismatch: return "length-mismatch";
        case ErrorCode::dimension_mismatch: return "dimension-mismatch";
        case ErrorCode::disconnected_graph: return "disconnected-graph";
        case ErrorCode::topology: return "topology-error";
        case ErrorCode::unknown_node: return "unknown-node";
        case ErrorCode::cross_layer_migration: return "cross-layer-migration";
        case ErrorCode::invalid_mode: return "invalid-mode";
        case ErrorCode::stale_index: return "stale-index";
        case ErrorCode::invalid_argument: return "invalid-argument";
    }
    return "unknown";
}

}  // namespace fog
