#include <doctest.h>

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cxrkit/common.hpp"
#include "cxrkit/data/image.hpp"
#include "cxrkit/model/checkpoint.hpp"
#include "cxrkit/model/stub.hpp"
#include "cxrkit/model/tensor_file.hpp"
#include "cxrkit/model/vit.hpp"
#include "cxrkit/rng.hpp"
#include "test_util.hpp"

using cxrkit::DataError;
using cxrkit::Rng;
using cxrkit::data::Image;
using namespace cxrkit::model;

namespace {

StubConfig small_stub() {
    StubConfig c;
    c.seed = 31;
    c.embed_dim = 7;
    c.n_blocks = 2;
    c.hidden_dim = 6;
    c.pool = 2;
    return c;
}

CheckpointMeta sample_meta() {
    CheckpointMeta meta;
    meta.freeze_policy.k_top_blocks = 2;
    meta.freeze_policy.unfreeze_post_norm_and_projection = false;
    meta.prompts.positive_template = "Radiograph with [disease]";
    meta.prompts.negative_prompt = "Unremarkable study";
    meta.seed = 99;
    meta.epoch = 5;
    meta.val_auc_history = {0.5, 0.875};
    meta.source_note = "adapt";
    return meta;
}

std::vector<Image> sample_batch(int n) {
    Rng rng(701);
    std::vector<Image> batch;
    for (int i = 0; i < n; ++i) {
        Image img = Image::zeros(3, 12, 12);
        for (float& v : img.data) v = static_cast<float>(rng.uniform());
        batch.push_back(std::move(img));
    }
    return batch;
}

// Metadata block that load_checkpoint accepts, for building corrupted
// files tensor by tensor.
std::map<std::string, std::string> stub_metadata(const StubBackend& backend) {
    std::map<std::string, std::string> m;
    m["format"] = "cxrkit-checkpoint-1";
    m["backend_kind"] = "stub";
    m["backend_config"] = backend.config_json().dump();
    m["freeze_policy"] = FreezePolicy{}.to_json().dump();
    m["prompts"] = PromptSet{}.to_json().dump();
    m["seed"] = "7";
    m["epoch"] = "0";
    m["val_auc_history"] = "[]";
    m["source_note"] = "test";
    return m;
}

std::vector<std::pair<std::string, const Tensor*>> encoder_tensors(const StubBackend& backend) {
    std::vector<std::pair<std::string, const Tensor*>> out;
    for (const auto& name : backend.params().names()) {
        out.emplace_back("encoder." + name, &backend.params().at(name));
    }
    return out;
}

} // namespace

TEST_CASE("stub checkpoint with head round-trips weights, metadata and evaluation") {
    testutil::TempDir dir("ckpt-stub");
    StubBackend backend(small_stub());
    HeadConfig head_config;
    head_config.in_dim = 7;
    head_config.hidden1 = 5;
    head_config.hidden2 = 4;
    head_config.out_dim = 3;
    const ClassifierHead head(head_config, 17);
    const CheckpointMeta meta = sample_meta();

    const auto path = dir.file("run.ckpt");
    save_checkpoint(path, backend, &head, meta);
    const Checkpoint loaded = load_checkpoint(path);

    REQUIRE(loaded.backend != nullptr);
    CHECK(loaded.backend->kind() == "stub");
    REQUIRE(loaded.head.has_value());

    for (const auto& name : backend.params().names()) {
        CHECK(loaded.backend->params().at(name).shape == backend.params().at(name).shape);
        CHECK(loaded.backend->params().at(name).values == backend.params().at(name).values);
    }
    for (const auto& name : head.params().names()) {
        CHECK(loaded.head->params().at(name).values == head.params().at(name).values);
    }

    const auto batch = sample_batch(3);
    const Eigen::MatrixXf features = backend.image_features(batch);
    CHECK(loaded.backend->image_features(batch) == features);
    CHECK(loaded.head->forward(features) == head.forward(features));
    CHECK(loaded.backend->text_features("the prompt") == backend.text_features("the prompt"));

    CHECK(loaded.meta.freeze_policy.k_top_blocks == 2);
    CHECK_FALSE(loaded.meta.freeze_policy.unfreeze_post_norm_and_projection);
    CHECK(loaded.meta.prompts.positive_template == meta.prompts.positive_template);
    CHECK(loaded.meta.prompts.negative_prompt == meta.prompts.negative_prompt);
    CHECK(loaded.meta.seed == 99);
    CHECK(loaded.meta.epoch == 5);
    CHECK(loaded.meta.val_auc_history == meta.val_auc_history);
    CHECK(loaded.meta.source_note == "adapt");
}

TEST_CASE("saving a loaded checkpoint reproduces the file byte for byte") {
    testutil::TempDir dir("ckpt-bytes");
    StubBackend backend(small_stub());
    HeadConfig head_config;
    head_config.in_dim = 7;
    head_config.hidden1 = 4;
    head_config.hidden2 = 4;
    head_config.out_dim = 2;
    const ClassifierHead head(head_config, 3);

    const auto first = dir.file("a.ckpt");
    const auto second = dir.file("b.ckpt");
    save_checkpoint(first, backend, &head, sample_meta());
    const Checkpoint loaded = load_checkpoint(first);
    save_checkpoint(second, *loaded.backend, &*loaded.head, loaded.meta);
    CHECK(testutil::read_file(first) == testutil::read_file(second));
}

TEST_CASE("checkpoint without a head loads with an empty head slot") {
    testutil::TempDir dir("ckpt-nohead");
    StubBackend backend(small_stub());
    const auto path = dir.file("encoder-only.ckpt");
    save_checkpoint(path, backend, nullptr, sample_meta());
    const Checkpoint loaded = load_checkpoint(path);
    CHECK_FALSE(loaded.head.has_value());
    CHECK(loaded.backend->params().names().size() == backend.params().names().size());
}

TEST_CASE("transformer checkpoint evaluates identically after reload") {
    testutil::TempDir dir("ckpt-vit");
    VitConfig config;
    config.image_size = 8;
    config.patch_size = 4;
    config.width = 8;
    config.layers = 1;
    config.heads = 2;
    config.embed_dim = 4;
    config.mlp_ratio = 2;
    config.with_text = false;
    config.seed = 41;
    const VitBackend backend(config);

    const auto path = dir.file("vit.ckpt");
    save_checkpoint(path, backend, nullptr, sample_meta());
    const Checkpoint loaded = load_checkpoint(path);
    CHECK(loaded.backend->kind() == "vit");

    Rng rng(703);
    std::vector<Image> batch;
    Image img = Image::zeros(3, 8, 8);
    for (float& v : img.data) v = static_cast<float>(rng.uniform());
    batch.push_back(std::move(img));
    CHECK(loaded.backend->image_features(batch) == backend.image_features(batch));
}

TEST_CASE("files without the format tag are rejected") {
    testutil::TempDir dir("ckpt-notag");
    const StubBackend backend(small_stub());
    write_tensor_file(dir.file("plain.st"), encoder_tensors(backend), {});
    CHECK_THROWS_AS(load_checkpoint(dir.file("plain.st")), DataError);

    auto meta = stub_metadata(backend);
    meta["format"] = "something-else";
    write_tensor_file(dir.file("wrongtag.st"), encoder_tensors(backend), meta);
    CHECK_THROWS_AS(load_checkpoint(dir.file("wrongtag.st")), DataError);
}

TEST_CASE("tensors outside the encoder and head namespaces are rejected") {
    testutil::TempDir dir("ckpt-stray");
    const StubBackend backend(small_stub());
    auto tensors = encoder_tensors(backend);
    const Tensor stray = Tensor::zeros(2);
    tensors.emplace_back("stray", &stray);
    write_tensor_file(dir.file("stray.ckpt"), tensors, stub_metadata(backend));
    CHECK_THROWS_AS(load_checkpoint(dir.file("stray.ckpt")), DataError);
}

TEST_CASE("head tensors without a head config are rejected") {
    testutil::TempDir dir("ckpt-orphan");
    const StubBackend backend(small_stub());
    auto tensors = encoder_tensors(backend);
    const Tensor orphan = Tensor::zeros(3, 2);
    tensors.emplace_back("head.fc1.weight", &orphan);
    write_tensor_file(dir.file("orphan.ckpt"), tensors, stub_metadata(backend));
    CHECK_THROWS_AS(load_checkpoint(dir.file("orphan.ckpt")), DataError);
}

TEST_CASE("unknown backend kinds and malformed fields are rejected") {
    testutil::TempDir dir("ckpt-fields");
    const StubBackend backend(small_stub());

    auto meta = stub_metadata(backend);
    meta["backend_kind"] = "banana";
    write_tensor_file(dir.file("kind.ckpt"), encoder_tensors(backend), meta);
    CHECK_THROWS_AS(load_checkpoint(dir.file("kind.ckpt")), DataError);

    meta = stub_metadata(backend);
    meta["seed"] = "not a number";
    write_tensor_file(dir.file("seed.ckpt"), encoder_tensors(backend), meta);
    CHECK_THROWS_AS(load_checkpoint(dir.file("seed.ckpt")), DataError);

    meta = stub_metadata(backend);
    meta["backend_config"] = "{broken";
    write_tensor_file(dir.file("config.ckpt"), encoder_tensors(backend), meta);
    CHECK_THROWS_AS(load_checkpoint(dir.file("config.ckpt")), DataError);

    meta = stub_metadata(backend);
    meta.erase("freeze_policy");
    write_tensor_file(dir.file("policy.ckpt"), encoder_tensors(backend), meta);
    CHECK_THROWS_AS(load_checkpoint(dir.file("policy.ckpt")), DataError);
}
