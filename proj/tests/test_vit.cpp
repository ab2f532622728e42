#include <doctest.h>

#include <cmath>
#include <memory>
#include <set>
#include <stdexcept>
#include <vector>

#include "cxrkit/common.hpp"
#include "cxrkit/data/image.hpp"
#include "cxrkit/model/tensor_file.hpp"
#include "cxrkit/model/vit.hpp"
#include "cxrkit/rng.hpp"
#include "test_util.hpp"

using cxrkit::DataError;
using cxrkit::Rng;
using cxrkit::data::Image;
using namespace cxrkit::model;

namespace {

// Vision-only config, small enough for finite differences.
VitConfig tiny_vision() {
    VitConfig c;
    c.image_size = 8;
    c.patch_size = 4;
    c.width = 8;
    c.layers = 2;
    c.heads = 2;
    c.embed_dim = 6;
    c.mlp_ratio = 2;
    c.with_text = false;
    c.seed = 21;
    return c;
}

// Image + text pair whose head counts survive shape-based inference
// (heads are inferred as width / 64, floored at 1).
VitConfig tiny_pair(const std::string& tokenizer_path) {
    VitConfig c = tiny_vision();
    c.heads = 1;
    c.with_text = true;
    c.vocab_size = 516;  // byte vocabulary + two merges + markers
    c.context_length = 8;
    c.text_width = 8;
    c.text_heads = 1;
    c.text_layers = 1;
    c.tokenizer_path = tokenizer_path;
    return c;
}

std::vector<Image> random_batch(Rng& rng, int n, int side) {
    std::vector<Image> batch;
    for (int i = 0; i < n; ++i) {
        Image img = Image::zeros(3, side, side);
        for (float& v : img.data) v = static_cast<float>(rng.uniform());
        batch.push_back(std::move(img));
    }
    return batch;
}

void write_merges(const std::filesystem::path& path) {
    testutil::write_file(path, "#version: 0.2\nt h\nth e</w>\n");
}

} // namespace

TEST_CASE("constructed parameters match the declared registry exactly") {
    const VitBackend backend(tiny_vision());
    const auto expected = VitBackend::expected_tensors(tiny_vision());
    REQUIRE(backend.params().names().size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(backend.params().names()[i] == expected[i].first);
        CHECK(backend.params().at(expected[i].first).shape == expected[i].second);
    }
    // Group walk covers every visual tensor in registry order.
    std::vector<std::string> from_groups;
    for (const auto& g : backend.visual_groups())
        for (const auto& p : g.params) from_groups.push_back(p);
    std::vector<std::string> visual_names;
    for (const auto& [name, shape] : expected) {
        if (name.rfind("visual.", 0) == 0) visual_names.push_back(name);
    }
    CHECK(from_groups == visual_names);
}

TEST_CASE("forward pass is deterministic with one embedding row per image") {
    const VitBackend backend(tiny_vision());
    Rng rng(501);
    const auto batch = random_batch(rng, 2, 8);

    const Eigen::MatrixXf features = backend.image_features(batch);
    REQUIRE(features.rows() == 2);
    REQUIRE(features.cols() == 6);
    CHECK(features.allFinite());
    CHECK(backend.image_features(batch) == features);

    std::unique_ptr<EncoderCache> cache;
    CHECK(backend.image_features_forward(batch, 0, cache) == features);
    CHECK(cache != nullptr);
}

TEST_CASE("initialization is seed-deterministic") {
    const VitBackend a(tiny_vision());
    const VitBackend b(tiny_vision());
    CHECK(a.params().content_hash() == b.params().content_hash());
    VitConfig other = tiny_vision();
    other.seed = 22;
    const VitBackend c(other);
    CHECK(a.params().content_hash() != c.params().content_hash());
    CHECK(a.logit_scale() == doctest::Approx(100.0).epsilon(1e-5));
}

TEST_CASE("backward gradients match finite differences on top-block parameters") {
    VitBackend backend(tiny_vision());
    Rng rng(503);
    const auto batch = random_batch(rng, 2, 8);
    Eigen::MatrixXf probe(2, 6);
    for (Eigen::Index i = 0; i < probe.size(); ++i)
        probe.data()[i] = static_cast<float>(rng.normal());

    auto objective = [&]() {
        return static_cast<double>(
            (backend.image_features(batch).array() * probe.array()).sum());
    };

    const std::string top = "visual.transformer.resblocks.1.";
    std::set<std::string> trainable{top + "ln_1.weight",
                                    top + "ln_1.bias",
                                    top + "attn.in_proj_weight",
                                    top + "attn.in_proj_bias",
                                    top + "attn.out_proj.weight",
                                    top + "attn.out_proj.bias",
                                    top + "ln_2.weight",
                                    top + "ln_2.bias",
                                    top + "mlp.c_fc.weight",
                                    top + "mlp.c_fc.bias",
                                    top + "mlp.c_proj.weight",
                                    top + "mlp.c_proj.bias",
                                    "visual.ln_post.weight",
                                    "visual.ln_post.bias",
                                    "visual.proj"};

    std::unique_ptr<EncoderCache> cache;
    backend.image_features_forward(batch, 1, cache);
    GradMap grads;
    backend.image_features_backward(*cache, probe, trainable, grads);

    const double h = 1e-2;
    struct ProbeSite {
        std::string name;
        std::size_t index;
    };
    for (const auto& site : std::vector<ProbeSite>{{top + "attn.in_proj_weight", 10},
                                                   {top + "attn.in_proj_bias", 5},
                                                   {top + "attn.out_proj.weight", 3},
                                                   {top + "ln_1.weight", 2},
                                                   {top + "ln_2.bias", 6},
                                                   {top + "mlp.c_fc.weight", 21},
                                                   {top + "mlp.c_proj.weight", 14},
                                                   {"visual.ln_post.weight", 4},
                                                   {"visual.proj", 17}}) {
        float& slot = backend.params().at(site.name).values[site.index];
        const float saved = slot;
        slot = static_cast<float>(saved + h);
        const float hi = slot;
        const double f_hi = objective();
        slot = static_cast<float>(saved - h);
        const float lo = slot;
        const double f_lo = objective();
        slot = saved;
        const double fd = (f_hi - f_lo) / (static_cast<double>(hi) - static_cast<double>(lo));
        const double an = grads.at(site.name)[site.index];
        CHECK(std::abs(an - fd) <= 2e-2 * std::max({std::abs(an), std::abs(fd), 1e-2}));
    }
}

TEST_CASE("partial cache reproduces top-block gradients exactly") {
    const VitBackend backend(tiny_vision());
    Rng rng(505);
    const auto batch = random_batch(rng, 2, 8);
    Eigen::MatrixXf d_emb(2, 6);
    for (Eigen::Index i = 0; i < d_emb.size(); ++i)
        d_emb.data()[i] = static_cast<float>(rng.normal());

    const std::string top = "visual.transformer.resblocks.1.";
    const std::set<std::string> trainable{top + "attn.in_proj_weight", top + "mlp.c_fc.weight",
                                          "visual.proj"};

    std::unique_ptr<EncoderCache> full_cache;
    backend.image_features_forward(batch, 0, full_cache);
    GradMap full;
    backend.image_features_backward(*full_cache, d_emb, trainable, full);

    std::unique_ptr<EncoderCache> top_cache;
    backend.image_features_forward(batch, 1, top_cache);
    GradMap top_grads;
    backend.image_features_backward(*top_cache, d_emb, trainable, top_grads);

    REQUIRE(full.names() == top_grads.names());
    for (const auto& name : full.names()) CHECK(full.at(name) == top_grads.at(name));
}

TEST_CASE("weights file round-trips through shape inference") {
    testutil::TempDir dir("vit-weights");
    write_merges(dir.file("merges.txt"));
    const VitBackend original(tiny_pair(dir.file("merges.txt").string()));

    std::vector<std::pair<std::string, const Tensor*>> tensors;
    for (const auto& name : original.params().names()) {
        tensors.emplace_back(name, &original.params().at(name));
    }
    write_tensor_file(dir.file("model.safetensors"), tensors, {});

    const auto loaded =
        VitBackend::from_weights_file(dir.file("model.safetensors"), dir.file("merges.txt").string());
    CHECK(loaded->config().image_size == 8);
    CHECK(loaded->config().patch_size == 4);
    CHECK(loaded->config().width == 8);
    CHECK(loaded->config().layers == 2);
    CHECK(loaded->config().heads == 1);
    CHECK(loaded->config().embed_dim == 6);
    CHECK(loaded->config().mlp_ratio == 2);
    CHECK(loaded->config().with_text);
    CHECK(loaded->config().vocab_size == 516);
    CHECK(loaded->config().context_length == 8);
    CHECK(loaded->config().text_layers == 1);
    CHECK(loaded->params().content_hash() == original.params().content_hash());

    Rng rng(507);
    const auto batch = random_batch(rng, 2, 8);
    CHECK(loaded->image_features(batch) == original.image_features(batch));
    CHECK(loaded->text_features("the") == original.text_features("the"));
}

TEST_CASE("scale stored as a one-element tensor still loads") {
    testutil::TempDir dir("vit-scale");
    write_merges(dir.file("merges.txt"));
    const VitBackend original(tiny_pair(dir.file("merges.txt").string()));

    Tensor scale = original.params().at("logit_scale");
    scale.shape = {1};
    std::vector<std::pair<std::string, const Tensor*>> tensors;
    for (const auto& name : original.params().names()) {
        tensors.emplace_back(name, name == "logit_scale" ? &scale : &original.params().at(name));
    }
    write_tensor_file(dir.file("model.safetensors"), tensors, {});
    const auto loaded =
        VitBackend::from_weights_file(dir.file("model.safetensors"), dir.file("merges.txt").string());
    CHECK(loaded->logit_scale() == original.logit_scale());
}

TEST_CASE("missing tensors in a weights file are reported") {
    testutil::TempDir dir("vit-missing");
    const VitBackend original(tiny_vision());
    std::vector<std::pair<std::string, const Tensor*>> tensors;
    for (const auto& name : original.params().names()) {
        if (name == "visual.proj") continue;
        tensors.emplace_back(name, &original.params().at(name));
    }
    write_tensor_file(dir.file("partial.safetensors"), tensors, {});
    CHECK_THROWS_AS(VitBackend::from_weights_file(dir.file("partial.safetensors"), ""), DataError);
}

TEST_CASE("config inference rejects malformed weight sets") {
    TensorFile bad;
    bad.tensors.emplace("visual.conv1.weight", Tensor::zeros(8, 1, 4, 4));
    CHECK_THROWS_AS(VitBackend::infer_config(bad), DataError);
}

TEST_CASE("text features are deterministic and normalize their input text") {
    testutil::TempDir dir("vit-text");
    write_merges(dir.file("merges.txt"));
    const VitBackend backend(tiny_pair(dir.file("merges.txt").string()));
    REQUIRE(backend.has_text_encoder());

    const Eigen::VectorXf a = backend.text_features("the");
    REQUIRE(a.size() == 6);
    CHECK(a.allFinite());
    CHECK(backend.text_features("the") == a);
    CHECK(backend.text_features("  THE ") == a);
    CHECK(backend.text_features("xyz") != a);
}

TEST_CASE("text encoder is unavailable without a tokenizer") {
    const VitBackend vision_only(tiny_vision());
    CHECK_FALSE(vision_only.has_text_encoder());
    CHECK_THROWS_AS(vision_only.text_features("the"), std::runtime_error);
}

TEST_CASE("clone is independent of the original") {
    VitBackend backend(tiny_vision());
    const auto copy = backend.clone();
    CHECK(copy->kind() == "vit");
    CHECK(copy->params().content_hash() == backend.params().content_hash());
    backend.params().at("visual.proj").values[0] += 0.5f;
    CHECK(copy->params().content_hash() != backend.params().content_hash());
}

TEST_CASE("invalid configs and inputs are rejected") {
    VitConfig bad = tiny_vision();
    bad.patch_size = 3;
    CHECK_THROWS_AS(VitBackend{bad}, std::invalid_argument);
    bad = tiny_vision();
    bad.heads = 3;
    CHECK_THROWS_AS(VitBackend{bad}, std::invalid_argument);

    const VitBackend backend(tiny_vision());
    std::vector<Image> wrong_size;
    wrong_size.push_back(Image::zeros(3, 16, 16));
    CHECK_THROWS_AS(backend.image_features(wrong_size), std::invalid_argument);
}

TEST_CASE("config round-trips through json") {
    testutil::TempDir dir("vit-json");
    write_merges(dir.file("merges.txt"));
    const VitConfig c = tiny_pair(dir.file("merges.txt").string());
    const VitBackend backend(c);
    const VitConfig back = VitBackend::config_from_json(backend.config_json());
    CHECK(back.image_size == c.image_size);
    CHECK(back.patch_size == c.patch_size);
    CHECK(back.width == c.width);
    CHECK(back.layers == c.layers);
    CHECK(back.heads == c.heads);
    CHECK(back.embed_dim == c.embed_dim);
    CHECK(back.mlp_ratio == c.mlp_ratio);
    CHECK(back.with_text == c.with_text);
    CHECK(back.vocab_size == c.vocab_size);
    CHECK(back.context_length == c.context_length);
    CHECK(back.text_width == c.text_width);
    CHECK(back.text_heads == c.text_heads);
    CHECK(back.text_layers == c.text_layers);
    CHECK(back.tokenizer_path == c.tokenizer_path);
    CHECK(back.seed == c.seed);
}
