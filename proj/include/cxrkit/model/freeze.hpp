#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cxrkit/model/backend.hpp"

namespace cxrkit::model {

struct FreezePolicy {
    int k_top_blocks = 3;
    bool unfreeze_post_norm_and_projection = true;

    nlohmann::json to_json() const;
    static FreezePolicy from_json(const nlohmann::json& j);
};

struct GroupFlag {
    std::string group;
    std::int64_t param_count = 0;
    bool trainable = false;
};

struct FreezeReport {
    std::vector<GroupFlag> groups;
    std::vector<std::string> trainable_params;  // tensor names, group order
    std::int64_t encoder_trainable = 0;
    std::int64_t encoder_total = 0;
    int first_trainable_block = 0;  // == num_blocks when no block is trainable

    std::int64_t trainable_with_head(std::int64_t head_params) const {
        return encoder_trainable + head_params;
    }
    std::int64_t total_with_head(std::int64_t head_params) const {
        return encoder_total + head_params;
    }
    double fraction_with_head(std::int64_t head_params) const {
        return static_cast<double>(trainable_with_head(head_params)) /
               static_cast<double>(total_with_head(head_params));
    }
};

// Marks exactly the last k_top_blocks blocks (plus post-norm and
// projection when flagged) trainable; stem groups stay frozen. Pure
// bookkeeping: the backend itself is not modified.
FreezeReport apply_freeze_policy(const EncoderBackend& backend, const FreezePolicy& policy);

} // namespace cxrkit::model
