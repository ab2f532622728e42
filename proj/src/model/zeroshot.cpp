#include "cxrkit/model/zeroshot.hpp"

#include <cmath>
#include <stdexcept>

#include "cxrkit/data/labels.hpp"

namespace cxrkit::model {

namespace {

Eigen::VectorXf normalized(const Eigen::VectorXf& v) {
    const float norm = v.norm();
    if (!(norm > 0.0f)) throw std::runtime_error("prompt embedding has zero norm");
    return v / norm;
}

} // namespace

PromptEmbeddings embed_prompts(const EncoderBackend& backend, const PromptSet& prompts,
                               std::optional<float> temperature) {
    validate_prompts(prompts);
    if (!backend.has_text_encoder()) {
        throw std::runtime_error("backend has no text encoder; prompt scoring unavailable");
    }
    PromptEmbeddings out;
    out.positive.resize(data::kNumClasses, backend.embed_dim());
    for (int c = 0; c < data::kNumClasses; ++c) {
        out.positive.row(c) = normalized(backend.text_features(prompts.positive_for_class(c)));
    }
    out.negative = normalized(backend.text_features(prompts.negative_prompt));
    out.temperature = temperature.value_or(backend.logit_scale());
    if (!(out.temperature > 0.0f)) {
        throw std::invalid_argument("temperature must be positive");
    }
    return out;
}

Eigen::MatrixXf zero_shot_scores(const Eigen::MatrixXf& image_embeddings,
                                 const PromptEmbeddings& prompt_embeddings) {
    if (image_embeddings.cols() != prompt_embeddings.positive.cols()) {
        throw std::invalid_argument("image/prompt embedding dimension mismatch");
    }
    const auto n = image_embeddings.rows();
    const auto k = prompt_embeddings.positive.rows();
    Eigen::MatrixXf scores(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXf img = image_embeddings.row(i).transpose();
        const float norm = img.norm();
        if (!(norm > 0.0f)) throw std::runtime_error("image embedding has zero norm");
        img /= norm;
        const float s_neg = prompt_embeddings.negative.dot(img);
        for (Eigen::Index c = 0; c < k; ++c) {
            const float s_pos = prompt_embeddings.positive.row(c).dot(img);
            // Two-way softmax written via the sigmoid of the similarity gap
            // for numerical stability at large temperatures.
            const double gap = static_cast<double>(prompt_embeddings.temperature) *
                               (static_cast<double>(s_pos) - static_cast<double>(s_neg));
            scores(i, c) = static_cast<float>(1.0 / (1.0 + std::exp(-gap)));
        }
    }
    return scores;
}

} // namespace cxrkit::model
