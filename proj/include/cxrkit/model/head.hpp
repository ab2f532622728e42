#pragma once

#include <cstdint>

#include <Eigen/Dense>
#include <json.hpp>

#include "cxrkit/model/params.hpp"
#include "cxrkit/rng.hpp"

namespace cxrkit::model {

struct HeadConfig {
    int in_dim = 512;
    int hidden1 = 512;
    int hidden2 = 256;
    int out_dim = 14;
    float dropout1 = 0.3f;
    float dropout2 = 0.2f;
};

// Intermediate activations for one forward pass; consumed by backward().
struct HeadCache {
    Eigen::MatrixXf input;
    Eigen::MatrixXf pre_ln1, hat1, act_in1, drop_mask1, hidden1_out;
    Eigen::MatrixXf pre_ln2, hat2, act_in2, drop_mask2, hidden2_out;
    Eigen::VectorXf inv_sigma1, inv_sigma2;
};

// Classification head on top of the image embedding:
// Linear -> LayerNorm -> GELU -> Dropout(0.3) ->
// Linear -> LayerNorm -> GELU -> Dropout(0.2) -> Linear.
class ClassifierHead {
public:
    ClassifierHead(const HeadConfig& config, std::uint64_t seed);
    ClassifierHead(const HeadConfig& config, ParamStore params);

    const HeadConfig& config() const { return config_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    static std::int64_t param_count(const HeadConfig& config);

    // Deterministic inference pass, dropout disabled.
    Eigen::MatrixXf forward(const Eigen::MatrixXf& features) const;
    // Training pass with active dropout; fills `cache` for backward().
    Eigen::MatrixXf forward_train(const Eigen::MatrixXf& features, Rng& rng,
                                  HeadCache& cache) const;
    // Accumulates parameter gradients; optionally emits d(loss)/d(features).
    void backward(const HeadCache& cache, const Eigen::MatrixXf& d_logits, GradMap& grads,
                  Eigen::MatrixXf* d_features = nullptr) const;

    nlohmann::json config_json() const;
    static HeadConfig config_from_json(const nlohmann::json& j);

private:
    Eigen::MatrixXf run(const Eigen::MatrixXf& features, Rng& rng, HeadCache& cache,
                        float dropout1, float dropout2) const;

    HeadConfig config_;
    ParamStore params_;
};

} // namespace cxrkit::model
