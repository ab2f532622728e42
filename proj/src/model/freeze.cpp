#include "cxrkit/model/freeze.hpp"

#include <stdexcept>

namespace cxrkit::model {

FreezeReport apply_freeze_policy(const EncoderBackend& backend, const FreezePolicy& policy) {
    const int n_blocks = backend.num_blocks();
    if (policy.k_top_blocks < 0) {
        throw std::invalid_argument("k_top_blocks must be >= 0");
    }
    if (policy.k_top_blocks > n_blocks) {
        throw std::invalid_argument("k_top_blocks (" + std::to_string(policy.k_top_blocks) +
                                    ") exceeds block count (" + std::to_string(n_blocks) + ")");
    }
    FreezeReport report;
    report.first_trainable_block = n_blocks - policy.k_top_blocks;
    const ParamStore& params = backend.params();
    for (const ParamGroup& group : backend.visual_groups()) {
        bool trainable = false;
        switch (group.kind) {
            case GroupKind::stem:
                trainable = false;
                break;
            case GroupKind::block:
                trainable = group.block_index >= report.first_trainable_block;
                break;
            case GroupKind::post_norm:
            case GroupKind::projection:
                trainable = policy.unfreeze_post_norm_and_projection;
                break;
        }
        std::int64_t count = 0;
        for (const std::string& name : group.params) {
            count += params.at(name).size();
        }
        report.groups.push_back({group.name, count, trainable});
        report.encoder_total += count;
        if (trainable) {
            report.encoder_trainable += count;
            for (const std::string& name : group.params) {
                report.trainable_params.push_back(name);
            }
        }
    }
    return report;
}

} // namespace cxrkit::model

namespace cxrkit::model {

nlohmann::json FreezePolicy::to_json() const {
    return {{"k_top_blocks", k_top_blocks},
            {"unfreeze_post_norm_and_projection", unfreeze_post_norm_and_projection}};
}

FreezePolicy FreezePolicy::from_json(const nlohmann::json& j) {
    FreezePolicy policy;
    policy.k_top_blocks = j.value("k_top_blocks", policy.k_top_blocks);
    policy.unfreeze_post_norm_and_projection =
        j.value("unfreeze_post_norm_and_projection", policy.unfreeze_post_norm_and_projection);
    return policy;
}

} // namespace cxrkit::model
