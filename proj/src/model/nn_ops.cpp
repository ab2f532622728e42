#include "cxrkit/model/nn_ops.hpp"

#include <cmath>

namespace cxrkit::model::ops {

Eigen::MatrixXf layer_norm(const Eigen::MatrixXf& x, const Eigen::VectorXf& gain,
                           const Eigen::VectorXf& bias, Eigen::MatrixXf& hat,
                           Eigen::VectorXf& inv_sigma) {
    const auto n = x.rows();
    const auto d = x.cols();
    hat.resize(n, d);
    inv_sigma.resize(n);
    Eigen::MatrixXf out(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const float mu = x.row(i).mean();
        const float var = (x.row(i).array() - mu).square().mean();
        const float inv = 1.0f / std::sqrt(var + kLayerNormEps);
        inv_sigma[i] = inv;
        hat.row(i) = ((x.row(i).array() - mu) * inv).matrix();
        out.row(i) =
            (hat.row(i).array() * gain.transpose().array() + bias.transpose().array()).matrix();
    }
    return out;
}

Eigen::MatrixXf layer_norm_backward(const Eigen::MatrixXf& d_out, const Eigen::MatrixXf& hat,
                                    const Eigen::VectorXf& inv_sigma,
                                    const Eigen::VectorXf& gain) {
    const auto n = d_out.rows();
    const auto d = d_out.cols();
    Eigen::MatrixXf d_in(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::ArrayXf dy = d_out.row(i).transpose().array() * gain.array();
        const float mean_dy = dy.mean();
        const float mean_dy_hat = (dy * hat.row(i).transpose().array()).mean();
        d_in.row(i) =
            ((dy - mean_dy - hat.row(i).transpose().array() * mean_dy_hat) * inv_sigma[i])
                .matrix()
                .transpose();
    }
    return d_in;
}

float gelu_erf(float x) {
    return 0.5f * x * (1.0f + std::erf(x * static_cast<float>(M_SQRT1_2)));
}

float gelu_erf_grad(float x) {
    const float cdf = 0.5f * (1.0f + std::erf(x * static_cast<float>(M_SQRT1_2)));
    const float pdf = std::exp(-0.5f * x * x) / std::sqrt(2.0f * static_cast<float>(M_PI));
    return cdf + x * pdf;
}

float quick_gelu(float x) {
    const float s = 1.0f / (1.0f + std::exp(-1.702f * x));
    return x * s;
}

float quick_gelu_grad(float x) {
    const float s = 1.0f / (1.0f + std::exp(-1.702f * x));
    return s + x * 1.702f * s * (1.0f - s);
}

void softmax_rows(Eigen::MatrixXf& x) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const float m = x.row(i).maxCoeff();
        x.row(i) = (x.row(i).array() - m).exp();
        x.row(i) /= x.row(i).sum();
    }
}

} // namespace cxrkit::model::ops
