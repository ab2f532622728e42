#pragma once

#include <cstdint>

#include "cxrkit/model/backend.hpp"

namespace cxrkit::model {

struct StubConfig {
    std::uint64_t seed = 7;
    int embed_dim = 512;
    int n_blocks = 4;
    int hidden_dim = 64;
    int pool = 8;  // images are average-pooled to pool x pool per channel
    bool with_text = true;
    float logit_scale = 10.0f;
};

// Deterministic test double. The image embedding is a seeded random
// projection of pool-downsampled pixels refined by small residual tanh
// blocks; the text embedding is a seeded hash-based projection of the
// token string. Exposes the same group layout as the real encoder so
// freeze policy and optimizer grouping are exercisable without weights.
class StubBackend : public EncoderBackend {
public:
    explicit StubBackend(const StubConfig& config);

    std::string kind() const override { return "stub"; }
    int embed_dim() const override { return config_.embed_dim; }
    int num_blocks() const override { return config_.n_blocks; }

    ParamStore& params() override { return params_; }
    const ParamStore& params() const override { return params_; }

    std::vector<ParamGroup> visual_groups() const override;

    Eigen::MatrixXf image_features(const std::vector<data::Image>& batch) const override;
    Eigen::MatrixXf image_features_forward(const std::vector<data::Image>& batch,
                                           int cache_from_block,
                                           std::unique_ptr<EncoderCache>& cache) const override;
    void image_features_backward(const EncoderCache& cache,
                                 const Eigen::MatrixXf& d_embeddings,
                                 const std::set<std::string>& trainable,
                                 GradMap& grads) const override;

    bool has_text_encoder() const override { return config_.with_text; }
    Eigen::VectorXf text_features(const std::string& prompt) const override;
    float logit_scale() const override { return config_.logit_scale; }

    nlohmann::json config_json() const override;
    std::unique_ptr<EncoderBackend> clone() const override;

    static StubConfig config_from_json(const nlohmann::json& j);
    // Rebuild around existing parameters (checkpoint load path).
    StubBackend(const StubConfig& config, ParamStore params);

private:
    Eigen::VectorXf downsample(const data::Image& image) const;

    StubConfig config_;
    ParamStore params_;
};

} // namespace cxrkit::model
