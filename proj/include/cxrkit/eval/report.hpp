#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "cxrkit/data/labels.hpp"

namespace cxrkit::eval {

// Where a score matrix came from: prompt-similarity scoring of an
// unadapted/adapted encoder, or the classifier head's logits.
enum class ScoreSource {
    zero_shot_prompts,
    head_logits,
};

std::string score_source_name(ScoreSource source);
ScoreSource score_source_from_name(const std::string& name);

struct ScoreMatrix {
    Eigen::MatrixXf scores;  // n_images x kNumClasses, any monotone score space
    Eigen::MatrixXi labels;  // n_images x kNumClasses, entries in {0,1}
    ScoreSource source = ScoreSource::head_logits;
};

struct EvalReport {
    std::array<std::optional<double>, data::kNumClasses> per_class_auc{};
    double mean_auc = 0.0;  // arithmetic mean of the defined per-class values
    int n_shots = 0;
    std::uint64_t seed = 0;
    ScoreSource source = ScoreSource::head_logits;
    std::string timestamp;
    std::string config_digest;
    // Free-form provenance (prompts used, checkpoint path, subset info, ...).
    nlohmann::json metadata = nlohmann::json::object();

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
};

// Per-class AUC down each column, macro mean over the defined classes.
// Classes without both label values are left undefined and excluded from
// the mean. n_shots / seed / config_digest are the caller's to fill in.
//
// Throws std::invalid_argument on shape mismatch or invalid entries and
// DataError when every class is undefined.
EvalReport evaluate(const ScoreMatrix& matrix);

} // namespace cxrkit::eval
