#pragma once

#include <optional>
#include <span>

namespace cxrkit::eval {

// Area under the ROC curve via the rank-sum (Mann-Whitney) estimator:
//   P(score_pos > score_neg) + 0.5 * P(score_pos == score_neg)
// over all positive/negative pairs, with midrank tie handling. O(n log n).
// Returns nullopt when the labels contain no positives or no negatives.
//
// Throws std::invalid_argument on empty input, length mismatch, labels
// outside {0,1}, or non-finite scores.
std::optional<double> roc_auc(std::span<const double> scores, std::span<const int> labels);

} // namespace cxrkit::eval
