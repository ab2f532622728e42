#pragma once

#include <Eigen/Dense>

namespace cxrkit::model::ops {

inline constexpr float kLayerNormEps = 1e-5f;

// Row-wise layer norm; writes normalized activations and keeps 1/sigma
// per row for the backward pass.
Eigen::MatrixXf layer_norm(const Eigen::MatrixXf& x, const Eigen::VectorXf& gain,
                           const Eigen::VectorXf& bias, Eigen::MatrixXf& hat,
                           Eigen::VectorXf& inv_sigma);

Eigen::MatrixXf layer_norm_backward(const Eigen::MatrixXf& d_out, const Eigen::MatrixXf& hat,
                                    const Eigen::VectorXf& inv_sigma, const Eigen::VectorXf& gain);

// Exact (erf-based) form, used in the classification head.
float gelu_erf(float x);
float gelu_erf_grad(float x);

// Sigmoid approximation x * sigmoid(1.702 x), used inside transformer MLPs.
float quick_gelu(float x);
float quick_gelu_grad(float x);

// In-place row-wise softmax.
void softmax_rows(Eigen::MatrixXf& x);

} // namespace cxrkit::model::ops
