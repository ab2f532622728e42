#pragma once

#include <Eigen/Dense>

namespace cxrkit::train {

struct LossResult {
    double loss = 0.0;          // mean over all batch x class entries
    Eigen::MatrixXf d_logits;   // gradient of that mean w.r.t. each logit
};

struct FocalLossParams {
    double alpha = 0.25;
    double gamma = 2.0;
};

// Focal binary cross-entropy on logits, computed in double precision in
// logit space (no exp overflow, no log(0)). `alpha` scales positives and
// negatives alike, so alpha=1, gamma=0 reduces exactly to plain BCE.
LossResult focal_bce_with_logits(const Eigen::MatrixXf& logits, const Eigen::MatrixXf& targets,
                                 double alpha, double gamma);

inline LossResult focal_bce_with_logits(const Eigen::MatrixXf& logits,
                                        const Eigen::MatrixXf& targets,
                                        const FocalLossParams& params) {
    return focal_bce_with_logits(logits, targets, params.alpha, params.gamma);
}

LossResult bce_with_logits(const Eigen::MatrixXf& logits, const Eigen::MatrixXf& targets);

} // namespace cxrkit::train
