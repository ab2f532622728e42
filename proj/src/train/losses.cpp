#include "cxrkit/train/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace cxrkit::train {

namespace {

double softplus(double x) {
    // log(1 + e^x) without overflow on either side.
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

} // namespace

LossResult focal_bce_with_logits(const Eigen::MatrixXf& logits, const Eigen::MatrixXf& targets,
                                 double alpha, double gamma) {
    if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
        throw std::invalid_argument("focal_bce_with_logits: logits/targets shape mismatch");
    }
    if (logits.size() == 0) throw std::invalid_argument("focal_bce_with_logits: empty batch");
    if (!(alpha > 0.0)) throw std::invalid_argument("focal_bce_with_logits: alpha must be > 0");
    if (gamma < 0.0) throw std::invalid_argument("focal_bce_with_logits: gamma must be >= 0");

    const double inv_count = 1.0 / static_cast<double>(logits.size());
    LossResult result;
    result.d_logits.resize(logits.rows(), logits.cols());

    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        for (Eigen::Index j = 0; j < logits.cols(); ++j) {
            const double target = static_cast<double>(targets(i, j));
            if (target != 0.0 && target != 1.0) {
                throw std::invalid_argument("focal_bce_with_logits: targets must be 0 or 1");
            }
            const double z = static_cast<double>(logits(i, j));
            // z_t is the logit of the probability assigned to the true label.
            const double z_t = target == 1.0 ? z : -z;
            const double s = 1.0 / (1.0 + std::exp(z_t));  // 1 - p_t
            const double log_pt = -softplus(-z_t);
            const double s_pow = gamma == 0.0 ? 1.0 : std::pow(s, gamma);

            total += alpha * s_pow * (-log_pt);
            double d_zt = -alpha * (gamma * s_pow * (1.0 - s) * (-log_pt) + s_pow * s);
            if (target != 1.0) d_zt = -d_zt;
            result.d_logits(i, j) = static_cast<float>(d_zt * inv_count);
        }
    }
    result.loss = total * inv_count;
    return result;
}

LossResult bce_with_logits(const Eigen::MatrixXf& logits, const Eigen::MatrixXf& targets) {
    return focal_bce_with_logits(logits, targets, 1.0, 0.0);
}

} // namespace cxrkit::train
