#include "cxrkit/train/loop.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <set>
#include <span>
#include <stdexcept>
#include <utility>

#include "cxrkit/common.hpp"
#include "cxrkit/eval/report.hpp"
#include "cxrkit/rng.hpp"
#include "cxrkit/train/optimizer.hpp"

namespace cxrkit::train {

namespace {

nlohmann::json augmentation_to_json(const data::AugmentationSpec& a) {
    return nlohmann::json{
        {"enabled", a.enabled},
        {"hflip_prob", a.hflip_prob},
        {"rotation_deg", a.rotation_deg},
        {"translate_frac", a.translate_frac},
        {"scale_min", a.scale_min},
        {"scale_max", a.scale_max},
        {"brightness", a.brightness},
        {"contrast", a.contrast},
        {"saturation", a.saturation},
    };
}

data::AugmentationSpec augmentation_from_json(const nlohmann::json& j) {
    data::AugmentationSpec a;
    a.enabled = j.value("enabled", a.enabled);
    a.hflip_prob = j.value("hflip_prob", a.hflip_prob);
    a.rotation_deg = j.value("rotation_deg", a.rotation_deg);
    a.translate_frac = j.value("translate_frac", a.translate_frac);
    a.scale_min = j.value("scale_min", a.scale_min);
    a.scale_max = j.value("scale_max", a.scale_max);
    a.brightness = j.value("brightness", a.brightness);
    a.contrast = j.value("contrast", a.contrast);
    a.saturation = j.value("saturation", a.saturation);
    return a;
}

nlohmann::json preprocess_to_json(const data::PreprocessSpec& p) {
    return nlohmann::json{
        {"target_size", p.target_size},
        {"mean", p.mean},
        {"stddev", p.stddev},
    };
}

data::PreprocessSpec preprocess_from_json(const nlohmann::json& j) {
    data::PreprocessSpec p;
    p.target_size = j.value("target_size", p.target_size);
    p.mean = j.value("mean", p.mean);
    p.stddev = j.value("stddev", p.stddev);
    return p;
}

// Loads, optionally augments, and preprocesses one minibatch; fills the
// 0/1 target matrix alongside.
std::vector<data::Image> load_batch(const data::DatasetManifest& set,
                                    const data::ImageProvider& provider,
                                    std::span<const std::size_t> indices,
                                    const data::PreprocessSpec& preprocess,
                                    const data::AugmentationSpec* augmentation, int epoch,
                                    std::uint64_t seed, Eigen::MatrixXf* targets) {
    std::vector<data::Image> images;
    images.reserve(indices.size());
    if (targets != nullptr) {
        targets->resize(static_cast<Eigen::Index>(indices.size()), data::kNumClasses);
    }
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const data::StudyRecord& record = set.records[indices[b]];
        data::Image image = provider.load(record.image_id);
        if (augmentation != nullptr && augmentation->enabled) {
            Rng augment_rng(data::augment_seed(seed, epoch, record.image_id));
            image = data::augment(image, *augmentation, augment_rng);
        }
        images.push_back(data::preprocess(image, preprocess));
        if (targets != nullptr) {
            for (int c = 0; c < data::kNumClasses; ++c) {
                (*targets)(static_cast<Eigen::Index>(b), c) =
                    static_cast<float>(record.labels[static_cast<std::size_t>(c)]);
            }
        }
    }
    return images;
}

double validation_mean_auc(const model::EncoderBackend& backend,
                           const model::ClassifierHead& head, const data::DatasetManifest& val_set,
                           const data::ImageProvider& provider,
                           const data::PreprocessSpec& preprocess, int batch_size) {
    const auto n = val_set.records.size();
    eval::ScoreMatrix matrix;
    matrix.scores.resize(static_cast<Eigen::Index>(n), data::kNumClasses);
    matrix.labels.resize(static_cast<Eigen::Index>(n), data::kNumClasses);
    matrix.source = eval::ScoreSource::head_logits;

    std::vector<std::size_t> indices(n);
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(n, start + static_cast<std::size_t>(batch_size));
        const std::span<const std::size_t> batch(indices.data() + start, end - start);
        const auto images = load_batch(val_set, provider, batch, preprocess, nullptr, 0, 0, nullptr);
        const Eigen::MatrixXf logits = head.forward(backend.image_features(images));
        for (std::size_t b = 0; b < batch.size(); ++b) {
            const data::StudyRecord& record = val_set.records[batch[b]];
            for (int c = 0; c < data::kNumClasses; ++c) {
                matrix.scores(static_cast<Eigen::Index>(start + b), c) =
                    logits(static_cast<Eigen::Index>(b), c);
                matrix.labels(static_cast<Eigen::Index>(start + b), c) =
                    record.labels[static_cast<std::size_t>(c)];
            }
        }
    }
    return eval::evaluate(matrix).mean_auc;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.uniform_int(i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

using Snapshot = std::vector<std::pair<std::string, std::vector<float>>>;

Snapshot take_snapshot(const model::ParamStore& params, const std::vector<std::string>& names) {
    Snapshot snapshot;
    snapshot.reserve(names.size());
    for (const std::string& name : names) {
        snapshot.emplace_back(name, params.at(name).values);
    }
    return snapshot;
}

void restore_snapshot(model::ParamStore& params, const Snapshot& snapshot) {
    for (const auto& [name, values] : snapshot) {
        params.at(name).values = values;
    }
}

} // namespace

nlohmann::json AdaptationConfig::to_json() const {
    return nlohmann::json{
        {"encoder_lr", encoder_lr},
        {"head_lr", head_lr},
        {"weight_decay", weight_decay},
        {"batch_size", batch_size},
        {"grad_clip_max_norm", grad_clip_max_norm},
        {"max_epochs", max_epochs},
        {"early_stop_patience", early_stop_patience},
        {"seed", seed},
        {"focal", {{"alpha", focal.alpha}, {"gamma", focal.gamma}}},
        {"plateau",
         {{"factor", plateau.factor}, {"patience", plateau.patience}, {"min_lr", plateau.min_lr}}},
        {"freeze", freeze.to_json()},
        {"augmentation", augmentation_to_json(augmentation)},
        {"preprocess", preprocess_to_json(preprocess)},
    };
}

AdaptationConfig AdaptationConfig::from_json(const nlohmann::json& j) {
    AdaptationConfig c;
    c.encoder_lr = j.value("encoder_lr", c.encoder_lr);
    c.head_lr = j.value("head_lr", c.head_lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.grad_clip_max_norm = j.value("grad_clip_max_norm", c.grad_clip_max_norm);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
    c.seed = j.value("seed", c.seed);
    if (j.contains("focal")) {
        c.focal.alpha = j.at("focal").value("alpha", c.focal.alpha);
        c.focal.gamma = j.at("focal").value("gamma", c.focal.gamma);
    }
    if (j.contains("plateau")) {
        c.plateau.factor = j.at("plateau").value("factor", c.plateau.factor);
        c.plateau.patience = j.at("plateau").value("patience", c.plateau.patience);
        c.plateau.min_lr = j.at("plateau").value("min_lr", c.plateau.min_lr);
    }
    if (j.contains("freeze")) c.freeze = model::FreezePolicy::from_json(j.at("freeze"));
    if (j.contains("augmentation")) c.augmentation = augmentation_from_json(j.at("augmentation"));
    if (j.contains("preprocess")) c.preprocess = preprocess_from_json(j.at("preprocess"));
    return c;
}

nlohmann::json FewShotConfig::to_json() const {
    return nlohmann::json{
        {"head_lr", head_lr},
        {"weight_decay", weight_decay},
        {"batch_size", batch_size},
        {"epochs", epochs},
        {"seed", seed},
        {"preprocess", preprocess_to_json(preprocess)},
    };
}

FewShotConfig FewShotConfig::from_json(const nlohmann::json& j) {
    FewShotConfig c;
    c.head_lr = j.value("head_lr", c.head_lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    if (j.contains("preprocess")) c.preprocess = preprocess_from_json(j.at("preprocess"));
    return c;
}

std::string TrainingTrace::to_jsonl() const {
    std::string out;
    for (const TraceRecord& r : records) {
        const nlohmann::json j{
            {"epoch", r.epoch},
            {"train_loss", r.train_loss},
            {"val_mean_auc", r.val_mean_auc},
            {"encoder_lr", r.encoder_lr},
            {"head_lr", r.head_lr},
            {"wall_time_sec", r.wall_time_sec},
            {"improved", r.improved},
        };
        out += j.dump();
        out += '\n';
    }
    const nlohmann::json summary{
        {"best_epoch", best_epoch},
        {"best_val_auc", best_val_auc},
        {"stop_reason", stop_reason},
    };
    out += summary.dump();
    out += '\n';
    return out;
}

TrainingTrace adapt(model::EncoderBackend& backend, model::ClassifierHead& head,
                    const data::DatasetManifest& train_set, const data::DatasetManifest& val_set,
                    const data::ImageProvider& provider, const model::FreezeReport& freeze,
                    const AdaptationConfig& config) {
    if (train_set.records.empty()) {
        throw DataError("adapt: training set is empty");
    }
    if (val_set.records.empty()) {
        throw std::invalid_argument("adapt: validation set is empty");
    }
    if (config.batch_size < 1 || config.max_epochs < 1 || config.early_stop_patience < 1) {
        throw std::invalid_argument("adapt: batch_size, max_epochs and early_stop_patience "
                                    "must all be >= 1");
    }
    if (config.encoder_lr <= 0.0 || config.head_lr <= 0.0) {
        throw std::invalid_argument("adapt: learning rates must be positive");
    }
    if (config.encoder_lr >= config.head_lr) {
        throw std::invalid_argument("adapt: encoder_lr must stay below head_lr");
    }
    if (config.grad_clip_max_norm <= 0.0) {
        throw std::invalid_argument("adapt: grad_clip_max_norm must be positive");
    }

    const bool train_encoder = !freeze.trainable_params.empty();
    const std::set<std::string> trainable_set(freeze.trainable_params.begin(),
                                              freeze.trainable_params.end());

    AdamW optimizer({
        {"encoder", &backend.params(), freeze.trainable_params, config.encoder_lr,
         config.weight_decay},
        {"head", &head.params(), head.params().names(), config.head_lr, config.weight_decay},
    });
    PlateauScheduler scheduler(config.plateau);

    TrainingTrace trace;
    trace.stop_reason = "max_epochs";
    double best_auc = -std::numeric_limits<double>::infinity();
    int stale_epochs = 0;
    Snapshot best_encoder, best_head;

    const std::size_t batch_size = static_cast<std::size_t>(config.batch_size);
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto epoch_start = std::chrono::steady_clock::now();
        Rng shuffle_rng(derive_seed(config.seed, "epoch_order", epoch));
        Rng dropout_rng(derive_seed(config.seed, "dropout", epoch));
        const auto order = shuffled_indices(train_set.records.size(), shuffle_rng);

        const double encoder_lr_in_effect = optimizer.lr(0);
        const double head_lr_in_effect = optimizer.lr(1);

        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t end = std::min(order.size(), start + batch_size);
            const std::span<const std::size_t> batch(order.data() + start, end - start);

            Eigen::MatrixXf targets;
            const auto images = load_batch(train_set, provider, batch, config.preprocess,
                                           &config.augmentation, epoch, config.seed, &targets);

            std::unique_ptr<model::EncoderCache> cache;
            const Eigen::MatrixXf features =
                train_encoder
                    ? backend.image_features_forward(images, freeze.first_trainable_block, cache)
                    : backend.image_features(images);
            model::HeadCache head_cache;
            const Eigen::MatrixXf logits = head.forward_train(features, dropout_rng, head_cache);

            const LossResult result = focal_bce_with_logits(logits, targets, config.focal);
            if (!std::isfinite(result.loss)) {
                throw TrainingAbort("adapt: non-finite loss at epoch " + std::to_string(epoch) +
                                    ", batch starting at sample " + std::to_string(start));
            }

            model::GradMap encoder_grads, head_grads;
            Eigen::MatrixXf d_features;
            head.backward(head_cache, result.d_logits, head_grads,
                          train_encoder ? &d_features : nullptr);
            if (train_encoder) {
                backend.image_features_backward(*cache, d_features, trainable_set, encoder_grads);
            }
            clip_gradients({&encoder_grads, &head_grads}, config.grad_clip_max_norm);
            optimizer.step({&encoder_grads, &head_grads});

            loss_sum += result.loss * static_cast<double>(batch.size());
            seen += batch.size();
        }

        const double val_auc = validation_mean_auc(backend, head, val_set, provider,
                                                   config.preprocess, config.batch_size);
        const bool improved = val_auc > best_auc;
        if (improved) {
            best_auc = val_auc;
            trace.best_epoch = epoch;
            stale_epochs = 0;
            best_encoder = take_snapshot(backend.params(), freeze.trainable_params);
            best_head = take_snapshot(head.params(), head.params().names());
        } else {
            ++stale_epochs;
        }

        const std::chrono::duration<double> elapsed =
            std::chrono::steady_clock::now() - epoch_start;
        trace.records.push_back({epoch, loss_sum / static_cast<double>(seen), val_auc,
                                 encoder_lr_in_effect, head_lr_in_effect, elapsed.count(),
                                 improved});

        if (scheduler.observe(val_auc)) {
            optimizer.set_lr(0, scheduler.reduced(optimizer.lr(0)));
            optimizer.set_lr(1, scheduler.reduced(optimizer.lr(1)));
        }
        if (stale_epochs >= config.early_stop_patience) {
            trace.stop_reason = "early_stop";
            break;
        }
    }

    trace.best_val_auc = best_auc;
    restore_snapshot(backend.params(), best_encoder);
    restore_snapshot(head.params(), best_head);
    return trace;
}

std::vector<double> fewshot_finetune(const model::EncoderBackend& backend,
                                     model::ClassifierHead& head,
                                     const data::DatasetManifest& subset_set,
                                     const data::ImageProvider& provider,
                                     const FewShotConfig& config) {
    if (subset_set.records.empty()) {
        throw DataError("fewshot_finetune: subset is empty");
    }
    if (config.batch_size < 1 || config.epochs < 1) {
        throw std::invalid_argument("fewshot_finetune: batch_size and epochs must be >= 1");
    }
    if (config.head_lr <= 0.0) {
        throw std::invalid_argument("fewshot_finetune: head_lr must be positive");
    }

    // The encoder is read-only here, so all embeddings are computed once.
    const std::size_t n = subset_set.records.size();
    const std::size_t batch_size = static_cast<std::size_t>(config.batch_size);
    Eigen::MatrixXf features(static_cast<Eigen::Index>(n), backend.embed_dim());
    Eigen::MatrixXf targets(static_cast<Eigen::Index>(n), data::kNumClasses);
    {
        std::vector<std::size_t> indices(n);
        std::iota(indices.begin(), indices.end(), std::size_t{0});
        for (std::size_t start = 0; start < n; start += batch_size) {
            const std::size_t end = std::min(n, start + batch_size);
            const std::span<const std::size_t> batch(indices.data() + start, end - start);
            Eigen::MatrixXf batch_targets;
            const auto images = load_batch(subset_set, provider, batch, config.preprocess,
                                           nullptr, 0, 0, &batch_targets);
            features.middleRows(static_cast<Eigen::Index>(start),
                                static_cast<Eigen::Index>(batch.size())) =
                backend.image_features(images);
            targets.middleRows(static_cast<Eigen::Index>(start),
                               static_cast<Eigen::Index>(batch.size())) = batch_targets;
        }
    }

    AdamW optimizer({
        {"head", &head.params(), head.params().names(), config.head_lr, config.weight_decay},
    });

    std::vector<double> epoch_losses;
    epoch_losses.reserve(static_cast<std::size_t>(config.epochs));
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(config.seed, "fewshot_order", epoch));
        Rng dropout_rng(derive_seed(config.seed, "fewshot_dropout", epoch));
        const auto order = shuffled_indices(n, shuffle_rng);

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += batch_size) {
            const std::size_t end = std::min(n, start + batch_size);
            const auto rows = static_cast<Eigen::Index>(end - start);
            Eigen::MatrixXf batch_features(rows, features.cols());
            Eigen::MatrixXf batch_targets(rows, data::kNumClasses);
            for (std::size_t b = start; b < end; ++b) {
                batch_features.row(static_cast<Eigen::Index>(b - start)) =
                    features.row(static_cast<Eigen::Index>(order[b]));
                batch_targets.row(static_cast<Eigen::Index>(b - start)) =
                    targets.row(static_cast<Eigen::Index>(order[b]));
            }

            model::HeadCache cache;
            const Eigen::MatrixXf logits = head.forward_train(batch_features, dropout_rng, cache);
            const LossResult result = bce_with_logits(logits, batch_targets);
            if (!std::isfinite(result.loss)) {
                throw TrainingAbort("fewshot_finetune: non-finite loss at epoch " +
                                    std::to_string(epoch));
            }
            model::GradMap grads;
            head.backward(cache, result.d_logits, grads, nullptr);
            optimizer.step({&grads});
            loss_sum += result.loss * static_cast<double>(rows);
        }
        epoch_losses.push_back(loss_sum / static_cast<double>(n));
    }
    return epoch_losses;
}

} // namespace cxrkit::train
