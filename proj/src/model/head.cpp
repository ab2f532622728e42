#include "cxrkit/model/head.hpp"

#include <cmath>
#include <stdexcept>

#include "cxrkit/model/nn_ops.hpp"

namespace cxrkit::model {

namespace {

using ops::layer_norm;
using ops::layer_norm_backward;

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMat> matrix_view(const Tensor& t) {
    return {t.values.data(), static_cast<Eigen::Index>(t.shape.at(0)),
            static_cast<Eigen::Index>(t.shape.at(1))};
}

Eigen::Map<const Eigen::VectorXf> vector_view(const Tensor& t) {
    return {t.values.data(), static_cast<Eigen::Index>(t.size())};
}

Tensor kaiming_linear(int out_dim, int in_dim, Rng& rng) {
    Tensor w = Tensor::zeros(out_dim, in_dim);
    const float stddev = std::sqrt(2.0f / static_cast<float>(in_dim));
    for (auto& v : w.values) v = static_cast<float>(rng.normal()) * stddev;
    return w;
}

Tensor ones(int dim) {
    Tensor t = Tensor::zeros(dim);
    for (auto& v : t.values) v = 1.0f;
    return t;
}

Eigen::MatrixXf dropout_mask(Eigen::Index rows, Eigen::Index cols, float p, Rng& rng) {
    Eigen::MatrixXf mask(rows, cols);
    if (p <= 0.0f) {
        mask.setOnes();
        return mask;
    }
    const float keep_scale = 1.0f / (1.0f - p);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            mask(i, j) = rng.bernoulli(p) ? 0.0f : keep_scale;
        }
    }
    return mask;
}

} // namespace

ClassifierHead::ClassifierHead(const HeadConfig& config, std::uint64_t seed) : config_(config) {
    if (config_.in_dim < 1 || config_.hidden1 < 1 || config_.hidden2 < 1 || config_.out_dim < 1) {
        throw std::invalid_argument("ClassifierHead: non-positive dimension in config");
    }
    if (config_.dropout1 < 0.0f || config_.dropout1 >= 1.0f || config_.dropout2 < 0.0f ||
        config_.dropout2 >= 1.0f) {
        throw std::invalid_argument("ClassifierHead: dropout probability out of [0, 1)");
    }
    Rng rng(derive_seed(seed, "head_init"));
    params_.add("fc1.weight", kaiming_linear(config_.hidden1, config_.in_dim, rng));
    params_.add("fc1.bias", Tensor::zeros(config_.hidden1));
    params_.add("ln1.weight", ones(config_.hidden1));
    params_.add("ln1.bias", Tensor::zeros(config_.hidden1));
    params_.add("fc2.weight", kaiming_linear(config_.hidden2, config_.hidden1, rng));
    params_.add("fc2.bias", Tensor::zeros(config_.hidden2));
    params_.add("ln2.weight", ones(config_.hidden2));
    params_.add("ln2.bias", Tensor::zeros(config_.hidden2));
    params_.add("fc3.weight", kaiming_linear(config_.out_dim, config_.hidden2, rng));
    params_.add("fc3.bias", Tensor::zeros(config_.out_dim));
}

ClassifierHead::ClassifierHead(const HeadConfig& config, ParamStore params)
    : config_(config), params_(std::move(params)) {
    const auto& w1 = params_.at("fc1.weight");
    if (w1.shape.size() != 2 || w1.shape[0] != config_.hidden1 || w1.shape[1] != config_.in_dim) {
        throw std::invalid_argument("ClassifierHead: parameter shapes do not match config");
    }
}

std::int64_t ClassifierHead::param_count(const HeadConfig& c) {
    const std::int64_t fc1 = static_cast<std::int64_t>(c.hidden1) * c.in_dim + c.hidden1;
    const std::int64_t ln1 = 2LL * c.hidden1;
    const std::int64_t fc2 = static_cast<std::int64_t>(c.hidden2) * c.hidden1 + c.hidden2;
    const std::int64_t ln2 = 2LL * c.hidden2;
    const std::int64_t fc3 = static_cast<std::int64_t>(c.out_dim) * c.hidden2 + c.out_dim;
    return fc1 + ln1 + fc2 + ln2 + fc3;
}

Eigen::MatrixXf ClassifierHead::forward(const Eigen::MatrixXf& features) const {
    Rng unused(0);
    HeadCache cache;
    // Dropout masks degenerate to the identity at p = 0.
    return run(features, unused, cache, 0.0f, 0.0f);
}

Eigen::MatrixXf ClassifierHead::forward_train(const Eigen::MatrixXf& features, Rng& rng,
                                              HeadCache& cache) const {
    return run(features, rng, cache, config_.dropout1, config_.dropout2);
}

Eigen::MatrixXf ClassifierHead::run(const Eigen::MatrixXf& features, Rng& rng, HeadCache& cache,
                                    float dropout1, float dropout2) const {
    if (features.cols() != config_.in_dim) {
        throw std::invalid_argument("ClassifierHead: feature dimension mismatch");
    }
    const auto w1 = matrix_view(params_.at("fc1.weight"));
    const auto b1 = vector_view(params_.at("fc1.bias"));
    const auto g1 = vector_view(params_.at("ln1.weight"));
    const auto beta1 = vector_view(params_.at("ln1.bias"));
    const auto w2 = matrix_view(params_.at("fc2.weight"));
    const auto b2 = vector_view(params_.at("fc2.bias"));
    const auto g2 = vector_view(params_.at("ln2.weight"));
    const auto beta2 = vector_view(params_.at("ln2.bias"));
    const auto w3 = matrix_view(params_.at("fc3.weight"));
    const auto b3 = vector_view(params_.at("fc3.bias"));

    cache.input = features;
    cache.pre_ln1 = (features * w1.transpose()).rowwise() + b1.transpose();
    Eigen::MatrixXf y1 = layer_norm(cache.pre_ln1, g1, beta1, cache.hat1, cache.inv_sigma1);
    cache.act_in1 = y1;
    Eigen::MatrixXf a1 = y1.unaryExpr([](float v) { return ops::gelu_erf(v); });
    cache.drop_mask1 = dropout_mask(a1.rows(), a1.cols(), dropout1, rng);
    cache.hidden1_out = a1.cwiseProduct(cache.drop_mask1);

    cache.pre_ln2 = (cache.hidden1_out * w2.transpose()).rowwise() + b2.transpose();
    Eigen::MatrixXf y2 = layer_norm(cache.pre_ln2, g2, beta2, cache.hat2, cache.inv_sigma2);
    cache.act_in2 = y2;
    Eigen::MatrixXf a2 = y2.unaryExpr([](float v) { return ops::gelu_erf(v); });
    cache.drop_mask2 = dropout_mask(a2.rows(), a2.cols(), dropout2, rng);
    cache.hidden2_out = a2.cwiseProduct(cache.drop_mask2);

    return (cache.hidden2_out * w3.transpose()).rowwise() + b3.transpose();
}

void ClassifierHead::backward(const HeadCache& cache, const Eigen::MatrixXf& d_logits,
                              GradMap& grads, Eigen::MatrixXf* d_features) const {
    const auto w1 = matrix_view(params_.at("fc1.weight"));
    const auto g1 = vector_view(params_.at("ln1.weight"));
    const auto w2 = matrix_view(params_.at("fc2.weight"));
    const auto g2 = vector_view(params_.at("ln2.weight"));
    const auto w3 = matrix_view(params_.at("fc3.weight"));

    auto grad_matrix = [&](const char* name, Eigen::Index r, Eigen::Index c) {
        return Eigen::Map<RowMat>(grads.accumulate(name, params_.at(name).size()).data(), r, c);
    };
    auto grad_vector = [&](const char* name, Eigen::Index d) {
        return Eigen::Map<Eigen::VectorXf>(grads.accumulate(name, params_.at(name).size()).data(), d);
    };

    grad_matrix("fc3.weight", config_.out_dim, config_.hidden2).noalias() +=
        d_logits.transpose() * cache.hidden2_out;
    grad_vector("fc3.bias", config_.out_dim) += d_logits.colwise().sum().transpose();
    Eigen::MatrixXf d_h2 = d_logits * w3;

    Eigen::MatrixXf d_a2 = d_h2.cwiseProduct(cache.drop_mask2);
    Eigen::MatrixXf d_y2 =
        d_a2.cwiseProduct(cache.act_in2.unaryExpr([](float v) { return ops::gelu_erf_grad(v); }));
    grad_vector("ln2.weight", config_.hidden2) +=
        d_y2.cwiseProduct(cache.hat2).colwise().sum().transpose();
    grad_vector("ln2.bias", config_.hidden2) += d_y2.colwise().sum().transpose();
    Eigen::MatrixXf d_z2 = layer_norm_backward(d_y2, cache.hat2, cache.inv_sigma2, g2);

    grad_matrix("fc2.weight", config_.hidden2, config_.hidden1).noalias() +=
        d_z2.transpose() * cache.hidden1_out;
    grad_vector("fc2.bias", config_.hidden2) += d_z2.colwise().sum().transpose();
    Eigen::MatrixXf d_h1 = d_z2 * w2;

    Eigen::MatrixXf d_a1 = d_h1.cwiseProduct(cache.drop_mask1);
    Eigen::MatrixXf d_y1 =
        d_a1.cwiseProduct(cache.act_in1.unaryExpr([](float v) { return ops::gelu_erf_grad(v); }));
    grad_vector("ln1.weight", config_.hidden1) +=
        d_y1.cwiseProduct(cache.hat1).colwise().sum().transpose();
    grad_vector("ln1.bias", config_.hidden1) += d_y1.colwise().sum().transpose();
    Eigen::MatrixXf d_z1 = layer_norm_backward(d_y1, cache.hat1, cache.inv_sigma1, g1);

    grad_matrix("fc1.weight", config_.hidden1, config_.in_dim).noalias() +=
        d_z1.transpose() * cache.input;
    grad_vector("fc1.bias", config_.hidden1) += d_z1.colwise().sum().transpose();
    if (d_features != nullptr) *d_features = d_z1 * w1;
}

nlohmann::json ClassifierHead::config_json() const {
    return {{"in_dim", config_.in_dim},   {"hidden1", config_.hidden1},
            {"hidden2", config_.hidden2}, {"out_dim", config_.out_dim},
            {"dropout1", config_.dropout1}, {"dropout2", config_.dropout2}};
}

HeadConfig ClassifierHead::config_from_json(const nlohmann::json& j) {
    HeadConfig config;
    config.in_dim = j.value("in_dim", config.in_dim);
    config.hidden1 = j.value("hidden1", config.hidden1);
    config.hidden2 = j.value("hidden2", config.hidden2);
    config.out_dim = j.value("out_dim", config.out_dim);
    config.dropout1 = j.value("dropout1", config.dropout1);
    config.dropout2 = j.value("dropout2", config.dropout2);
    return config;
}

} // namespace cxrkit::model
