#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "cxrkit/model/params.hpp"
#include "cxrkit/train/optimizer.hpp"

using cxrkit::model::GradMap;
using cxrkit::model::ParamStore;
using cxrkit::model::Tensor;
using cxrkit::train::AdamW;
using cxrkit::train::clip_gradients;

namespace {

ParamStore single_param(float value, int size = 1) {
    ParamStore store;
    Tensor t = Tensor::zeros(size);
    for (float& v : t.values) v = value;
    store.add("w", std::move(t));
    return store;
}

} // namespace

TEST_CASE("first step matches the hand-derived update") {
    ParamStore store = single_param(1.0f);
    AdamW opt({{"g", &store, {"w"}, 0.1, 0.0}});
    GradMap grads;
    grads.accumulate("w", 1)[0] = 0.5f;
    opt.step({&grads});

    // Bias-corrected first step: m_hat = g, v_hat = g^2, so the update is
    // lr * g / (|g| + eps) = lr * sign(g), up to eps.
    const double expected = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
    CHECK(static_cast<double>(store.at("w").values[0]) == doctest::Approx(expected).epsilon(1e-6));
    CHECK(opt.step_count() == 1);
}

TEST_CASE("two steps track a double-precision reference loop") {
    ParamStore store = single_param(0.8f);
    AdamW opt({{"g", &store, {"w"}, 0.05, 0.0}});

    double m = 0.0, v = 0.0, theta = 0.8;
    const double grads_in[2] = {0.3, -0.7};
    for (int t = 1; t <= 2; ++t) {
        GradMap grads;
        grads.accumulate("w", 1)[0] = static_cast<float>(grads_in[t - 1]);
        opt.step({&grads});

        const double g = grads_in[t - 1];
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double m_hat = m / (1.0 - std::pow(0.9, t));
        const double v_hat = v / (1.0 - std::pow(0.999, t));
        theta -= 0.05 * m_hat / (std::sqrt(v_hat) + 1e-8);
    }
    CHECK(static_cast<double>(store.at("w").values[0]) == doctest::Approx(theta).epsilon(1e-5));
}

TEST_CASE("weight decay is decoupled and applies without gradients") {
    ParamStore store = single_param(2.0f);
    AdamW opt({{"g", &store, {"w"}, 0.1, 0.01}});
    GradMap empty;
    opt.step({&empty});
    // No gradient: the Adam term is zero and only decay acts.
    CHECK(static_cast<double>(store.at("w").values[0]) ==
          doctest::Approx(2.0 * (1.0 - 0.1 * 0.01)).epsilon(1e-6));
    opt.step({&empty});
    CHECK(static_cast<double>(store.at("w").values[0]) ==
          doctest::Approx(2.0 * (1.0 - 0.001) * (1.0 - 0.001)).epsilon(1e-6));
}

TEST_CASE("groups keep independent learning rates") {
    ParamStore enc = single_param(0.0f);
    ParamStore head = single_param(0.0f);
    AdamW opt({{"encoder", &enc, {"w"}, 1e-5, 0.0}, {"head", &head, {"w"}, 1e-4, 0.0}});
    GradMap genc, ghead;
    genc.accumulate("w", 1)[0] = 1.0f;
    ghead.accumulate("w", 1)[0] = 1.0f;
    opt.step({&genc, &ghead});

    const double d_enc = -static_cast<double>(enc.at("w").values[0]);
    const double d_head = -static_cast<double>(head.at("w").values[0]);
    CHECK(d_enc == doctest::Approx(1e-5).epsilon(1e-3));
    CHECK(d_head == doctest::Approx(1e-4).epsilon(1e-3));
    CHECK(opt.group_count() == 2);
    CHECK(opt.group_name(0) == "encoder");
    CHECK(opt.lr(1) == 1e-4);
    opt.set_lr(1, 5e-5);
    CHECK(opt.lr(1) == 5e-5);
}

TEST_CASE("mismatched inputs are rejected") {
    ParamStore store = single_param(1.0f, 3);
    AdamW opt({{"g", &store, {"w"}, 0.1, 0.0}});
    GradMap bad;
    bad.accumulate("w", 2);
    CHECK_THROWS_AS(opt.step({&bad}), std::invalid_argument);
    GradMap ok;
    CHECK_THROWS_AS(opt.step({&ok, &ok}), std::invalid_argument);
    CHECK_THROWS_AS(AdamW({{"g", nullptr, {"w"}, 0.1, 0.0}}), std::invalid_argument);
}

TEST_CASE("clipping rescales the global norm onto the threshold") {
    GradMap grads;
    auto& g = grads.accumulate("w", 2);
    g[0] = 0.0f;
    g[1] = 4.0f;  // norm is 4x a threshold of 1
    const double factor = clip_gradients({&grads}, 1.0);
    CHECK(factor == doctest::Approx(0.25).epsilon(1e-9));
    double norm_sq = 0.0;
    for (float v : grads.at("w")) norm_sq += static_cast<double>(v) * v;
    CHECK(std::abs(std::sqrt(norm_sq) - 1.0) <= 1e-6);
}

TEST_CASE("clipping below the threshold is the identity") {
    GradMap grads;
    auto& g = grads.accumulate("w", 2);
    g[0] = 3.0f;
    g[1] = 4.0f;  // norm is exactly 5
    CHECK(clip_gradients({&grads}, 6.0) == 1.0);
    CHECK(grads.at("w")[0] == 3.0f);
    CHECK(grads.at("w")[1] == 4.0f);
    // Exactly at the threshold also passes through untouched.
    CHECK(clip_gradients({&grads}, 5.0) == 1.0);
    CHECK(grads.at("w")[0] == 3.0f);
}

TEST_CASE("clipping norm is global across gradient maps") {
    GradMap a, b;
    a.accumulate("x", 1)[0] = 3.0f;
    b.accumulate("y", 1)[0] = 4.0f;  // combined norm 5
    const double factor = clip_gradients({&a, &b}, 1.0);
    CHECK(factor == doctest::Approx(0.2).epsilon(1e-9));
    CHECK(a.at("x")[0] == doctest::Approx(0.6f).epsilon(1e-6));
    CHECK(b.at("y")[0] == doctest::Approx(0.8f).epsilon(1e-6));
}

TEST_CASE("clip threshold must be positive") {
    GradMap grads;
    grads.accumulate("w", 1)[0] = 1.0f;
    CHECK_THROWS_AS(clip_gradients({&grads}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(clip_gradients({&grads}, -1.0), std::invalid_argument);
}
