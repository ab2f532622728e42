#include "cxrkit/eval/report.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "cxrkit/common.hpp"
#include "cxrkit/eval/metrics.hpp"

namespace cxrkit::eval {

std::string score_source_name(ScoreSource source) {
    switch (source) {
    case ScoreSource::zero_shot_prompts: return "zero_shot_prompts";
    case ScoreSource::head_logits: return "head_logits";
    }
    throw std::invalid_argument("unknown score source");
}

ScoreSource score_source_from_name(const std::string& name) {
    if (name == "zero_shot_prompts") return ScoreSource::zero_shot_prompts;
    if (name == "head_logits") return ScoreSource::head_logits;
    throw std::invalid_argument("unknown score source '" + name + "'");
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json per_class = nlohmann::json::array();
    nlohmann::json undefined = nlohmann::json::array();
    for (int c = 0; c < data::kNumClasses; ++c) {
        const auto& value = per_class_auc[static_cast<std::size_t>(c)];
        if (value.has_value()) {
            per_class.push_back(*value);
        } else {
            per_class.push_back(nullptr);
            undefined.push_back(data::disease_names()[static_cast<std::size_t>(c)]);
        }
    }
    return nlohmann::json{
        {"classes", data::disease_names()},
        {"config_digest", config_digest},
        {"mean_auc", mean_auc},
        {"metadata", metadata},
        {"n_shots", n_shots},
        {"per_class_auc", per_class},
        {"seed", seed},
        {"source", score_source_name(source)},
        {"timestamp", timestamp},
        {"undefined_classes", undefined},
    };
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
    for (const char* field :
         {"per_class_auc", "mean_auc", "n_shots", "seed", "source", "timestamp", "config_digest"}) {
        if (!j.contains(field)) {
            throw DataError(std::string("evaluation report is missing field '") + field + "'");
        }
    }
    const auto& per_class = j.at("per_class_auc");
    if (!per_class.is_array() || per_class.size() != data::kNumClasses) {
        throw DataError("evaluation report field 'per_class_auc' must be an array of 14 entries");
    }
    EvalReport report;
    for (int c = 0; c < data::kNumClasses; ++c) {
        const auto& entry = per_class.at(static_cast<std::size_t>(c));
        if (!entry.is_null()) {
            report.per_class_auc[static_cast<std::size_t>(c)] = entry.get<double>();
        }
    }
    report.mean_auc = j.at("mean_auc").get<double>();
    report.n_shots = j.at("n_shots").get<int>();
    report.seed = j.at("seed").get<std::uint64_t>();
    report.source = score_source_from_name(j.at("source").get<std::string>());
    report.timestamp = j.at("timestamp").get<std::string>();
    report.config_digest = j.at("config_digest").get<std::string>();
    report.metadata = j.value("metadata", nlohmann::json::object());
    return report;
}

EvalReport evaluate(const ScoreMatrix& matrix) {
    if (matrix.scores.rows() == 0) {
        throw std::invalid_argument("evaluate: score matrix has no rows");
    }
    if (matrix.scores.cols() != data::kNumClasses || matrix.labels.cols() != data::kNumClasses) {
        throw std::invalid_argument("evaluate: matrices must have one column per class");
    }
    if (matrix.scores.rows() != matrix.labels.rows()) {
        throw std::invalid_argument("evaluate: scores and labels disagree on row count");
    }

    EvalReport report;
    report.source = matrix.source;
    report.timestamp = iso8601_utc_now();

    const auto rows = static_cast<std::size_t>(matrix.scores.rows());
    std::vector<double> scores(rows);
    std::vector<int> labels(rows);
    double sum = 0.0;
    int defined = 0;
    for (int c = 0; c < data::kNumClasses; ++c) {
        for (std::size_t i = 0; i < rows; ++i) {
            scores[i] = static_cast<double>(matrix.scores(static_cast<Eigen::Index>(i), c));
            labels[i] = matrix.labels(static_cast<Eigen::Index>(i), c);
        }
        const auto auc = roc_auc(scores, labels);
        report.per_class_auc[static_cast<std::size_t>(c)] = auc;
        if (auc.has_value()) {
            sum += *auc;
            ++defined;
        }
    }
    if (defined == 0) {
        throw DataError("evaluate: no class has both positive and negative labels");
    }
    report.mean_auc = sum / static_cast<double>(defined);
    return report;
}

} // namespace cxrkit::eval
