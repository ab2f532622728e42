#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cxrkit/data/augment.hpp"
#include "cxrkit/data/image.hpp"
#include "cxrkit/data/manifest.hpp"
#include "cxrkit/data/preprocess.hpp"
#include "cxrkit/model/backend.hpp"
#include "cxrkit/model/freeze.hpp"
#include "cxrkit/model/head.hpp"
#include "cxrkit/train/losses.hpp"
#include "cxrkit/train/scheduler.hpp"

namespace cxrkit::train {

struct AdaptationConfig {
    double encoder_lr = 1e-5;
    double head_lr = 1e-4;
    double weight_decay = 1e-2;
    int batch_size = 32;
    double grad_clip_max_norm = 1.0;
    int max_epochs = 30;
    int early_stop_patience = 5;
    std::uint64_t seed = 7;
    FocalLossParams focal{};
    PlateauScheduler::Config plateau{};
    model::FreezePolicy freeze{};
    data::AugmentationSpec augmentation{};
    data::PreprocessSpec preprocess{};

    nlohmann::json to_json() const;
    static AdaptationConfig from_json(const nlohmann::json& j);
};

struct FewShotConfig {
    double head_lr = 1e-4;
    double weight_decay = 1e-2;
    int batch_size = 16;
    int epochs = 20;
    std::uint64_t seed = 7;
    data::PreprocessSpec preprocess{};

    nlohmann::json to_json() const;
    static FewShotConfig from_json(const nlohmann::json& j);
};

struct TraceRecord {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_mean_auc = 0.0;
    double encoder_lr = 0.0;  // rates in effect during this epoch
    double head_lr = 0.0;
    double wall_time_sec = 0.0;
    bool improved = false;
};

struct TrainingTrace {
    std::vector<TraceRecord> records;
    int best_epoch = 0;
    double best_val_auc = 0.0;
    std::string stop_reason;  // "max_epochs" or "early_stop"

    // One JSON object per line. wall_time_sec is the only field that varies
    // between otherwise identical runs.
    std::string to_jsonl() const;
};

// Domain-adaptation loop. Trains the encoder parameters listed in `freeze`
// plus the whole head: shuffled augmented minibatches, focal loss, global
// gradient clipping, decoupled-weight-decay Adam with separate encoder and
// head rates. Validation mean AUC drives plateau LR halving, early stopping,
// and best-epoch selection; backend and head are left holding the best
// epoch's weights.
//
// Throws std::invalid_argument on bad config or empty inputs and
// TrainingAbort when the loss turns non-finite.
TrainingTrace adapt(model::EncoderBackend& backend, model::ClassifierHead& head,
                    const data::DatasetManifest& train_set, const data::DatasetManifest& val_set,
                    const data::ImageProvider& provider, const model::FreezeReport& freeze,
                    const AdaptationConfig& config);

// Few-shot head refinement: the encoder is read-only (embeddings are
// computed once up front), the head trains with plain BCE and no
// augmentation. Returns the mean training loss per epoch.
std::vector<double> fewshot_finetune(const model::EncoderBackend& backend,
                                     model::ClassifierHead& head,
                                     const data::DatasetManifest& subset_set,
                                     const data::ImageProvider& provider,
                                     const FewShotConfig& config);

} // namespace cxrkit::train
