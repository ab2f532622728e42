#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cxrkit/model/backend.hpp"
#include "cxrkit/model/freeze.hpp"
#include "cxrkit/model/head.hpp"
#include "cxrkit/model/prompts.hpp"

namespace cxrkit::model {

// Run state carried alongside the weights. Deliberately contains nothing
// time-dependent, so identical runs produce identical checkpoint bytes.
struct CheckpointMeta {
    FreezePolicy freeze_policy;
    PromptSet prompts;
    std::uint64_t seed = 7;
    int epoch = 0;
    std::vector<double> val_auc_history;
    std::string source_note;  // e.g. "adapt", "fewshot:n=4"
};

struct Checkpoint {
    std::unique_ptr<EncoderBackend> backend;
    std::optional<ClassifierHead> head;
    CheckpointMeta meta;
};

// Single-file container in the same layout as the weights files: encoder
// tensors under "encoder.", head tensors under "head.", run state in the
// string metadata. A loaded checkpoint evaluates bit-identically to the
// saved model.
void save_checkpoint(const std::filesystem::path& path, const EncoderBackend& backend,
                     const ClassifierHead* head, const CheckpointMeta& meta);

Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace cxrkit::model
