#pragma once

#include <Eigen/Dense>

#include <memory>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cxrkit/data/image.hpp"
#include "cxrkit/model/params.hpp"

namespace cxrkit::model {

enum class GroupKind { stem, block, post_norm, projection };

struct ParamGroup {
    std::string name;
    GroupKind kind = GroupKind::stem;
    int block_index = -1;  // valid when kind == block
    std::vector<std::string> params;
};

// Opaque forward activations for the training path.
struct EncoderCache {
    virtual ~EncoderCache() = default;
};

// Pretrained (or stubbed) image/text embedder with enumerable visual
// parameter groups. Immutable during evaluation; training requires
// exclusive access to params().
class EncoderBackend {
public:
    virtual ~EncoderBackend() = default;

    virtual std::string kind() const = 0;
    virtual int embed_dim() const = 0;
    virtual int num_blocks() const = 0;

    virtual ParamStore& params() = 0;
    virtual const ParamStore& params() const = 0;

    // Ordered: stem groups, block.0..block.{n-1}, post-norm, projection.
    virtual std::vector<ParamGroup> visual_groups() const = 0;

    // Evaluation-mode embeddings, one row per image.
    virtual Eigen::MatrixXf image_features(const std::vector<data::Image>& batch) const = 0;

    // Training path. cache_from_block limits stored activations to blocks
    // >= that index (gradients below it are never requested).
    virtual Eigen::MatrixXf image_features_forward(const std::vector<data::Image>& batch,
                                                   int cache_from_block,
                                                   std::unique_ptr<EncoderCache>& cache) const = 0;
    virtual void image_features_backward(const EncoderCache& cache,
                                         const Eigen::MatrixXf& d_embeddings,
                                         const std::set<std::string>& trainable,
                                         GradMap& grads) const = 0;

    virtual bool has_text_encoder() const = 0;
    virtual Eigen::VectorXf text_features(const std::string& prompt) const = 0;

    // Cosine-similarity multiplier used as the default zero-shot temperature.
    virtual float logit_scale() const = 0;

    virtual nlohmann::json config_json() const = 0;
    virtual std::unique_ptr<EncoderBackend> clone() const = 0;
};

} // namespace cxrkit::model
