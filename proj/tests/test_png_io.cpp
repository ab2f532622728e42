#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "cxrkit/common.hpp"
#include "cxrkit/data/png_io.hpp"
#include "cxrkit/rng.hpp"
#include "test_util.hpp"

using cxrkit::DataError;
using cxrkit::Rng;
using namespace cxrkit::data;

TEST_CASE("grayscale round-trips within 8-bit quantization") {
    testutil::TempDir dir("png-gray");
    Image src = Image::zeros(1, 7, 11);
    Rng rng(81);
    for (float& v : src.data) v = static_cast<float>(rng.uniform());
    write_png(dir.file("g.png"), src);
    const Image back = read_png(dir.file("g.png"));
    REQUIRE(back.channels == 1);
    REQUIRE(back.height == 7);
    REQUIRE(back.width == 11);
    for (std::size_t i = 0; i < src.data.size(); ++i) {
        CHECK(std::abs(back.data[i] - src.data[i]) <= 0.5f / 255.0f + 1e-6f);
    }
}

TEST_CASE("rgb round-trips within 8-bit quantization") {
    testutil::TempDir dir("png-rgb");
    Image src = Image::zeros(3, 5, 6);
    Rng rng(83);
    for (float& v : src.data) v = static_cast<float>(rng.uniform());
    write_png(dir.file("c.png"), src);
    const Image back = read_png(dir.file("c.png"));
    REQUIRE(back.channels == 3);
    for (std::size_t i = 0; i < src.data.size(); ++i) {
        CHECK(std::abs(back.data[i] - src.data[i]) <= 0.5f / 255.0f + 1e-6f);
    }
}

TEST_CASE("out-of-range values clamp on write") {
    testutil::TempDir dir("png-clamp");
    Image src = Image::zeros(1, 1, 2);
    src.data[0] = -0.4f;
    src.data[1] = 1.7f;
    write_png(dir.file("x.png"), src);
    const Image back = read_png(dir.file("x.png"));
    CHECK(back.data[0] == 0.0f);
    CHECK(back.data[1] == 1.0f);
}

TEST_CASE("write rejects unsupported shapes") {
    testutil::TempDir dir("png-bad");
    CHECK_THROWS_AS(write_png(dir.file("two.png"), Image::zeros(2, 4, 4)), std::invalid_argument);
    CHECK_THROWS_AS(write_png(dir.file("empty.png"), Image{}), std::invalid_argument);
}

TEST_CASE("read failures raise DataError") {
    testutil::TempDir dir("png-read");
    CHECK_THROWS_AS(read_png(dir.file("missing.png")), DataError);
    testutil::write_file(dir.file("junk.png"), "not a png at all");
    CHECK_THROWS_AS(read_png(dir.file("junk.png")), DataError);
}
