#pragma once

#include <filesystem>
#include <memory>

#include "cxrkit/model/backend.hpp"
#include "cxrkit/model/tensor_file.hpp"
#include "cxrkit/model/tokenizer.hpp"

namespace cxrkit::model {

struct VitConfig {
    int image_size = 224;
    int patch_size = 32;
    int width = 768;
    int layers = 12;
    int heads = 12;
    int embed_dim = 512;
    int mlp_ratio = 4;

    bool with_text = true;
    int vocab_size = 49408;
    int context_length = 77;
    int text_width = 512;
    int text_heads = 8;
    int text_layers = 12;

    std::string tokenizer_path;  // BPE merges; text encoding needs it
    std::uint64_t seed = 7;      // random init when no weights are loaded
};

// Contrastively pretrained vision transformer pair. Parameter names follow
// the published checkpoint convention (visual.conv1.weight, visual.
// transformer.resblocks.N..., token_embedding.weight, ...), so weight
// files exported from those checkpoints load directly.
class VitBackend : public EncoderBackend {
public:
    // Seeded random initialization (scaled-down configs for tests).
    explicit VitBackend(const VitConfig& config);
    // Adopt existing parameters, checked against the config.
    VitBackend(const VitConfig& config, ParamStore params);
    // Load a weights file, inferring the architecture from tensor shapes.
    static std::unique_ptr<VitBackend> from_weights_file(const std::filesystem::path& weights,
                                                         const std::string& tokenizer_path);

    std::string kind() const override { return "vit"; }
    int embed_dim() const override { return config_.embed_dim; }
    int num_blocks() const override { return config_.layers; }

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

    bool has_text_encoder() const override { return config_.with_text && tokenizer_ != nullptr; }
    Eigen::VectorXf text_features(const std::string& prompt) const override;
    float logit_scale() const override;

    nlohmann::json config_json() const override;
    static VitConfig config_from_json(const nlohmann::json& j);
    static VitConfig infer_config(const TensorFile& file);
    std::unique_ptr<EncoderBackend> clone() const override;

    const VitConfig& config() const { return config_; }

    // Name and shape of every parameter, in registry order.
    static std::vector<std::pair<std::string, std::vector<std::int64_t>>> expected_tensors(
        const VitConfig& config);

private:
    void load_tokenizer();
    void validate_shapes() const;
    Eigen::MatrixXf embed_image(const data::Image& image) const;

    VitConfig config_;
    ParamStore params_;
    std::shared_ptr<const BpeTokenizer> tokenizer_;
};

} // namespace cxrkit::model
