#include "cxrkit/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace cxrkit::eval {

std::optional<double> roc_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.empty()) {
        throw std::invalid_argument("roc_auc: empty input");
    }
    if (scores.size() != labels.size()) {
        throw std::invalid_argument("roc_auc: scores and labels differ in length");
    }

    std::size_t positives = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) {
            throw std::invalid_argument("roc_auc: non-finite score");
        }
        if (labels[i] != 0 && labels[i] != 1) {
            throw std::invalid_argument("roc_auc: labels must be 0 or 1");
        }
        positives += static_cast<std::size_t>(labels[i]);
    }
    const std::size_t negatives = scores.size() - positives;
    if (positives == 0 || negatives == 0) {
        return std::nullopt;
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Walk runs of equal scores; every element of a run gets the midrank,
    // which charges half credit to each tied positive/negative pair.
    double positive_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        // 1-based ranks i+1 .. j averaged.
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) positive_rank_sum += midrank;
        }
        i = j;
    }

    const double p = static_cast<double>(positives);
    const double n = static_cast<double>(negatives);
    return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

} // namespace cxrkit::eval
