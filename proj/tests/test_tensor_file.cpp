#include <doctest.h>

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cxrkit/common.hpp"
#include "cxrkit/model/tensor_file.hpp"
#include "test_util.hpp"

using cxrkit::DataError;
using namespace cxrkit::model;

namespace {

// Assembles a file in the container layout by hand so payload encodings
// other than F32 can be exercised.
std::string assemble(const nlohmann::json& header, const std::string& payload) {
    std::string header_text = header.dump();
    std::string out;
    const std::uint64_t len = header_text.size();
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((len >> (8 * i)) & 0xff));
    out += header_text;
    out += payload;
    return out;
}

std::string le_bytes(std::uint16_t v) {
    std::string s;
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>(v >> 8));
    return s;
}

} // namespace

TEST_CASE("f32 tensors round-trip with metadata") {
    testutil::TempDir dir("tf-roundtrip");
    Tensor a = Tensor::zeros(2, 3);
    for (std::size_t i = 0; i < a.values.size(); ++i) a.values[i] = 0.5f * static_cast<float>(i) - 1.0f;
    Tensor b = Tensor::zeros(4);
    b.values = {1.0f, -2.5f, 3.25f, 0.0f};

    const auto path = dir.file("pair.safetensors");
    write_tensor_file(path, {{"beta", &b}, {"alpha", &a}}, {{"origin", "unit test"}});

    const TensorFile file = read_tensor_file(path);
    REQUIRE(file.tensors.size() == 2);
    CHECK(file.metadata.at("origin") == "unit test");
    CHECK(file.at("alpha").shape == std::vector<std::int64_t>{2, 3});
    CHECK(file.at("alpha").values == a.values);
    CHECK(file.at("beta").shape == std::vector<std::int64_t>{4});
    CHECK(file.at("beta").values == b.values);
    CHECK_FALSE(file.has("gamma"));
    CHECK_THROWS_AS(file.at("gamma"), DataError);
}

TEST_CASE("writes are byte-deterministic and name-sorted") {
    testutil::TempDir dir("tf-determinism");
    Tensor a = Tensor::zeros(3);
    a.values = {1.0f, 2.0f, 3.0f};
    Tensor b = Tensor::zeros(2);
    b.values = {9.0f, 8.0f};

    write_tensor_file(dir.file("one.st"), {{"a", &a}, {"b", &b}}, {});
    write_tensor_file(dir.file("two.st"), {{"b", &b}, {"a", &a}}, {});
    CHECK(testutil::read_file(dir.file("one.st")) == testutil::read_file(dir.file("two.st")));
}

TEST_CASE("duplicate names are rejected on write") {
    testutil::TempDir dir("tf-dup");
    Tensor a = Tensor::zeros(1);
    CHECK_THROWS_AS(write_tensor_file(dir.file("dup.st"), {{"a", &a}, {"a", &a}}, {}),
                    std::invalid_argument);
}

TEST_CASE("f16 payload widens to the exact float values") {
    testutil::TempDir dir("tf-f16");
    // 0x3C00 = 1.0, 0xC000 = -2.0, 0x3800 = 0.5, 0x0001 = smallest subnormal.
    const std::string payload =
        le_bytes(0x3C00) + le_bytes(0xC000) + le_bytes(0x3800) + le_bytes(0x0001);
    const nlohmann::json header = {
        {"h", {{"dtype", "F16"}, {"shape", {4}}, {"data_offsets", {0, 8}}}}};
    testutil::write_file(dir.file("h.st"), assemble(header, payload));

    const TensorFile file = read_tensor_file(dir.file("h.st"));
    const auto& v = file.at("h").values;
    REQUIRE(v.size() == 4);
    CHECK(v[0] == 1.0f);
    CHECK(v[1] == -2.0f);
    CHECK(v[2] == 0.5f);
    CHECK(v[3] == doctest::Approx(5.9604645e-8).epsilon(1e-6));
}

TEST_CASE("bf16 payload widens by mantissa extension") {
    testutil::TempDir dir("tf-bf16");
    // bf16 is the top 16 bits of an f32: 0x3F80 = 1.0, 0xC040 = -3.0.
    const std::string payload = le_bytes(0x3F80) + le_bytes(0xC040);
    const nlohmann::json header = {
        {"b", {{"dtype", "BF16"}, {"shape", {2}}, {"data_offsets", {0, 4}}}}};
    testutil::write_file(dir.file("b.st"), assemble(header, payload));

    const TensorFile file = read_tensor_file(dir.file("b.st"));
    CHECK(file.at("b").values == std::vector<float>{1.0f, -3.0f});
}

TEST_CASE("f64 payload narrows to float") {
    testutil::TempDir dir("tf-f64");
    const double value = 0.1;
    std::string payload(8, '\0');
    std::memcpy(payload.data(), &value, 8);
    const nlohmann::json header = {
        {"d", {{"dtype", "F64"}, {"shape", {1}}, {"data_offsets", {0, 8}}}}};
    testutil::write_file(dir.file("d.st"), assemble(header, payload));

    const TensorFile file = read_tensor_file(dir.file("d.st"));
    CHECK(file.at("d").values[0] == static_cast<float>(0.1));
}

TEST_CASE("scalar tensors use the empty shape") {
    testutil::TempDir dir("tf-scalar");
    const float value = 4.6052f;
    std::string payload(4, '\0');
    std::memcpy(payload.data(), &value, 4);
    const nlohmann::json header = {
        {"logit_scale",
         {{"dtype", "F32"}, {"shape", nlohmann::json::array()}, {"data_offsets", {0, 4}}}}};
    testutil::write_file(dir.file("s.st"), assemble(header, payload));

    const TensorFile file = read_tensor_file(dir.file("s.st"));
    CHECK(file.at("logit_scale").shape.empty());
    REQUIRE(file.at("logit_scale").values.size() == 1);
    CHECK(file.at("logit_scale").values[0] == value);
}

TEST_CASE("malformed files raise DataError") {
    testutil::TempDir dir("tf-bad");

    CHECK_THROWS_AS(read_tensor_file(dir.file("absent.st")), DataError);

    testutil::write_file(dir.file("short.st"), "abc");
    CHECK_THROWS_AS(read_tensor_file(dir.file("short.st")), DataError);

    // Header length that points past the end of the file.
    std::string truncated = assemble(nlohmann::json::object(), "");
    truncated[0] = static_cast<char>(200);
    testutil::write_file(dir.file("trunc.st"), truncated);
    CHECK_THROWS_AS(read_tensor_file(dir.file("trunc.st")), DataError);

    std::string broken = assemble(nlohmann::json::object(), "");
    broken[8] = '[';
    testutil::write_file(dir.file("notobj.st"), broken);
    CHECK_THROWS_AS(read_tensor_file(dir.file("notobj.st")), DataError);

    const nlohmann::json bad_dtype = {
        {"t", {{"dtype", "I8"}, {"shape", {1}}, {"data_offsets", {0, 1}}}}};
    testutil::write_file(dir.file("dtype.st"), assemble(bad_dtype, "x"));
    CHECK_THROWS_AS(read_tensor_file(dir.file("dtype.st")), DataError);

    const nlohmann::json wrong_len = {
        {"t", {{"dtype", "F32"}, {"shape", {2}}, {"data_offsets", {0, 4}}}}};
    testutil::write_file(dir.file("len.st"), assemble(wrong_len, std::string(4, '\0')));
    CHECK_THROWS_AS(read_tensor_file(dir.file("len.st")), DataError);

    const nlohmann::json overrun = {
        {"t", {{"dtype", "F32"}, {"shape", {4}}, {"data_offsets", {0, 16}}}}};
    testutil::write_file(dir.file("overrun.st"), assemble(overrun, std::string(8, '\0')));
    CHECK_THROWS_AS(read_tensor_file(dir.file("overrun.st")), DataError);

    const nlohmann::json bad_meta = {{"__metadata__", {{"k", 5}}}};
    testutil::write_file(dir.file("meta.st"), assemble(bad_meta, ""));
    CHECK_THROWS_AS(read_tensor_file(dir.file("meta.st")), DataError);

    // Error text carries the file path for debuggability.
    try {
        read_tensor_file(dir.file("dtype.st"));
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("dtype.st") != std::string::npos);
    }
}
