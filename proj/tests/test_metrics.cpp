#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "cxrkit/eval/metrics.hpp"
#include "cxrkit/rng.hpp"
#include "oracles.hpp"

using cxrkit::Rng;
using cxrkit::eval::roc_auc;

TEST_CASE("perfect separation scores 1, inverted scores 0") {
    const std::vector<double> scores{0.1, 0.2, 0.8, 0.9};
    const std::vector<int> labels{0, 0, 1, 1};
    CHECK(roc_auc(scores, labels) == 1.0);
    const std::vector<int> flipped{1, 1, 0, 0};
    CHECK(roc_auc(scores, flipped) == 0.0);
}

TEST_CASE("all-tied scores give exactly one half") {
    const std::vector<double> scores{3.0, 3.0, 3.0, 3.0, 3.0};
    const std::vector<int> labels{1, 0, 1, 0, 0};
    CHECK(roc_auc(scores, labels) == 0.5);
}

TEST_CASE("hand-computed tie case") {
    // positives at 2 and 3, negatives at 1 and 2:
    // (2>1) + (2==2)/2 + (3>1) + (3>2) = 3.5 of 4 pairs
    const std::vector<double> scores{1.0, 2.0, 2.0, 3.0};
    const std::vector<int> labels{0, 1, 0, 1};
    CHECK(roc_auc(scores, labels) == 3.5 / 4.0);
}

TEST_CASE("single positive and negative") {
    CHECK(roc_auc(std::vector<double>{0.2, 0.7}, std::vector<int>{0, 1}) == 1.0);
    CHECK(roc_auc(std::vector<double>{0.7, 0.2}, std::vector<int>{0, 1}) == 0.0);
    CHECK(roc_auc(std::vector<double>{0.5, 0.5}, std::vector<int>{0, 1}) == 0.5);
}

TEST_CASE("degenerate label sets are undefined") {
    const std::vector<double> scores{0.1, 0.5, 0.9};
    CHECK_FALSE(roc_auc(scores, std::vector<int>{1, 1, 1}).has_value());
    CHECK_FALSE(roc_auc(scores, std::vector<int>{0, 0, 0}).has_value());
}

TEST_CASE("invalid inputs throw") {
    CHECK_THROWS_AS(roc_auc(std::vector<double>{}, std::vector<int>{}), std::invalid_argument);
    CHECK_THROWS_AS(roc_auc(std::vector<double>{0.5}, std::vector<int>{0, 1}),
                    std::invalid_argument);
    CHECK_THROWS_AS(roc_auc(std::vector<double>{0.5, 0.6}, std::vector<int>{0, 2}),
                    std::invalid_argument);
    CHECK_THROWS_AS(roc_auc(std::vector<double>{0.5, 0.6}, std::vector<int>{-1, 1}),
                    std::invalid_argument);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(roc_auc(std::vector<double>{nan, 0.6}, std::vector<int>{0, 1}),
                    std::invalid_argument);
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(roc_auc(std::vector<double>{inf, 0.6}, std::vector<int>{0, 1}),
                    std::invalid_argument);
}

TEST_CASE("invariant under strictly monotone score transforms") {
    Rng rng(21);
    std::vector<double> scores(60);
    std::vector<int> labels(60);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        scores[i] = static_cast<double>(rng.uniform_int(8));  // force ties
        labels[i] = rng.bernoulli(0.4) ? 1 : 0;
    }
    labels[0] = 1;
    labels[1] = 0;
    std::vector<double> warped(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) warped[i] = std::exp(scores[i]) + 5.0;
    CHECK(roc_auc(scores, labels) == roc_auc(warped, labels));
}

TEST_CASE("flipping every label complements the area") {
    Rng rng(23);
    std::vector<double> scores(80);
    std::vector<int> labels(80);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        scores[i] = rng.uniform();
        labels[i] = rng.bernoulli(0.5) ? 1 : 0;
    }
    labels[0] = 1;
    labels[1] = 0;
    std::vector<int> flipped(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) flipped[i] = 1 - labels[i];
    const double a = *roc_auc(scores, labels);
    const double b = *roc_auc(scores, flipped);
    CHECK(std::abs(a + b - 1.0) < 1e-12);
}

TEST_CASE("agrees exactly with the pairwise oracle on randomized tied data") {
    Rng rng(25);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_int(119));
        std::vector<double> scores(static_cast<std::size_t>(n));
        std::vector<int> labels(static_cast<std::size_t>(n));
        // Alternate tie-heavy integer grids with continuous draws.
        const bool gridded = trial % 2 == 0;
        for (int i = 0; i < n; ++i) {
            scores[static_cast<std::size_t>(i)] =
                gridded ? static_cast<double>(rng.uniform_int(5)) : rng.uniform(-3.0, 3.0);
            labels[static_cast<std::size_t>(i)] = rng.bernoulli(0.35) ? 1 : 0;
        }
        const auto fast = roc_auc(scores, labels);
        const auto slow = oracle::pairwise_auc(scores, labels);
        CHECK(fast.has_value() == slow.has_value());
        if (fast.has_value()) CHECK(*fast == *slow);
    }
}
