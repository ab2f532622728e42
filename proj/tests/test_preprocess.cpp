#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "cxrkit/data/preprocess.hpp"

using cxrkit::data::Image;
using cxrkit::data::preprocess;
using cxrkit::data::PreprocessSpec;
using cxrkit::data::resize_bicubic;

TEST_CASE("resize preserves constant images exactly up to float rounding") {
    Image src = Image::zeros(1, 9, 13);
    for (float& v : src.data) v = 0.37f;
    const Image up = resize_bicubic(src, 21, 17);
    const Image down = resize_bicubic(src, 5, 7);
    for (float v : up.data) CHECK(v == doctest::Approx(0.37f).epsilon(1e-6));
    for (float v : down.data) CHECK(v == doctest::Approx(0.37f).epsilon(1e-6));
}

TEST_CASE("resize to the same shape is the identity") {
    Image src = Image::zeros(1, 6, 6);
    for (std::size_t i = 0; i < src.data.size(); ++i) src.data[i] = static_cast<float>(i) * 0.01f;
    const Image same = resize_bicubic(src, 6, 6);
    CHECK(same.data == src.data);
}

TEST_CASE("resize reproduces linear ramps away from the borders") {
    Image src = Image::zeros(1, 8, 8);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) src.at(0, y, x) = static_cast<float>(x) / 8.0f;
    }
    const Image up = resize_bicubic(src, 16, 16);
    // Interior outputs draw on interior taps only, where the Catmull-Rom
    // kernel has linear precision.
    for (int ox = 3; ox <= 12; ++ox) {
        const float fx = (static_cast<float>(ox) + 0.5f) * 0.5f - 0.5f;
        CHECK(up.at(0, 8, ox) == doctest::Approx(fx / 8.0f).epsilon(1e-4));
    }
}

TEST_CASE("resize rejects empty images") {
    CHECK_THROWS_AS(resize_bicubic(Image{}, 4, 4), std::invalid_argument);
}

TEST_CASE("preprocess replicates grayscale and normalizes per channel") {
    Image src = Image::zeros(1, 48, 48);
    for (float& v : src.data) v = 0.5f;
    PreprocessSpec spec;
    spec.target_size = 16;
    const Image out = preprocess(src, spec);
    REQUIRE(out.channels == 3);
    REQUIRE(out.height == 16);
    REQUIRE(out.width == 16);
    for (int c = 0; c < 3; ++c) {
        const float expected = (0.5f - spec.mean[static_cast<std::size_t>(c)]) /
                               spec.stddev[static_cast<std::size_t>(c)];
        CHECK(out.at(c, 8, 8) == doctest::Approx(expected).epsilon(1e-5));
    }
}

TEST_CASE("preprocess crops the long dimension centrally") {
    // 32x64 with a dark left half and bright right half; the 16x16 crop of
    // the 16x32 resize covers columns [8, 24), leaving clean margins on
    // both sides of the blurred seam.
    Image src = Image::zeros(1, 32, 64);
    for (int y = 0; y < 32; ++y) {
        for (int x = 32; x < 64; ++x) src.at(0, y, x) = 1.0f;
    }
    PreprocessSpec spec;
    spec.target_size = 16;
    const Image out = preprocess(src, spec);
    const float mean0 = spec.mean[0];
    const float std0 = spec.stddev[0];
    const float left = out.at(0, 8, 0) * std0 + mean0;
    const float right = out.at(0, 8, 15) * std0 + mean0;
    CHECK(left < 0.1f);
    CHECK(right > 0.9f);
}

TEST_CASE("preprocess validates its input") {
    PreprocessSpec spec;
    CHECK_THROWS_AS(preprocess(Image{}, spec), std::invalid_argument);
    CHECK_THROWS_AS(preprocess(Image::zeros(2, 8, 8), spec), std::invalid_argument);
    Image ok = Image::zeros(1, 8, 8);
    PreprocessSpec bad;
    bad.target_size = 0;
    CHECK_THROWS_AS(preprocess(ok, bad), std::invalid_argument);
}

TEST_CASE("three-channel input keeps its channels distinct") {
    Image src = Image::zeros(3, 32, 32);
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
            src.at(0, y, x) = 0.2f;
            src.at(1, y, x) = 0.5f;
            src.at(2, y, x) = 0.8f;
        }
    }
    PreprocessSpec spec;
    spec.target_size = 16;
    const Image out = preprocess(src, spec);
    CHECK(out.at(0, 8, 8) == doctest::Approx((0.2f - spec.mean[0]) / spec.stddev[0]).epsilon(1e-5));
    CHECK(out.at(1, 8, 8) == doctest::Approx((0.5f - spec.mean[1]) / spec.stddev[1]).epsilon(1e-5));
    CHECK(out.at(2, 8, 8) == doctest::Approx((0.8f - spec.mean[2]) / spec.stddev[2]).epsilon(1e-5));
}
