#pragma once

#include <optional>

#include <Eigen/Dense>

#include "cxrkit/model/backend.hpp"
#include "cxrkit/model/prompts.hpp"

namespace cxrkit::model {

// Text-side state for prompt scoring: unit-normalized positive embedding
// per class plus the shared negative embedding.
struct PromptEmbeddings {
    Eigen::MatrixXf positive;  // n_classes x embed_dim
    Eigen::VectorXf negative;
    float temperature = 1.0f;
};

// Encodes the prompt set once. `temperature` overrides the backend's
// logit scale when given.
PromptEmbeddings embed_prompts(const EncoderBackend& backend, const PromptSet& prompts,
                               std::optional<float> temperature = std::nullopt);

// Per-class probability from a two-way softmax between the positive prompt
// and the shared negative prompt over cosine similarities.
// `image_embeddings` is batch x embed_dim (not necessarily normalized);
// the result is batch x n_classes with every entry in (0, 1).
Eigen::MatrixXf zero_shot_scores(const Eigen::MatrixXf& image_embeddings,
                                 const PromptEmbeddings& prompt_embeddings);

} // namespace cxrkit::model
