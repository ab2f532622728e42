#include <doctest.h>

#include <cmath>
#include <memory>
#include <set>
#include <stdexcept>
#include <vector>

#include "cxrkit/data/image.hpp"
#include "cxrkit/model/stub.hpp"
#include "cxrkit/rng.hpp"

using cxrkit::Rng;
using cxrkit::data::Image;
using namespace cxrkit::model;

namespace {

StubConfig tiny_config() {
    StubConfig c;
    c.seed = 11;
    c.embed_dim = 5;
    c.n_blocks = 2;
    c.hidden_dim = 6;
    c.pool = 2;
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

} // namespace

TEST_CASE("same config yields identical parameters, different seed diverges") {
    const StubBackend a(tiny_config());
    const StubBackend b(tiny_config());
    CHECK(a.params().content_hash() == b.params().content_hash());

    StubConfig other = tiny_config();
    other.seed = 12;
    const StubBackend c(other);
    CHECK(a.params().content_hash() != c.params().content_hash());
}

TEST_CASE("group layout covers every parameter in order") {
    const StubBackend backend(tiny_config());
    const auto groups = backend.visual_groups();
    REQUIRE(groups.size() == 5);
    CHECK(groups[0].name == "stem");
    CHECK(groups[0].kind == GroupKind::stem);
    CHECK(groups[1].name == "block.0");
    CHECK(groups[1].kind == GroupKind::block);
    CHECK(groups[1].block_index == 0);
    CHECK(groups[2].block_index == 1);
    CHECK(groups[3].name == "ln_post");
    CHECK(groups[3].kind == GroupKind::post_norm);
    CHECK(groups[4].name == "proj");
    CHECK(groups[4].kind == GroupKind::projection);

    std::vector<std::string> from_groups;
    for (const auto& g : groups)
        for (const auto& p : g.params) from_groups.push_back(p);
    CHECK(from_groups == backend.params().names());
}

TEST_CASE("evaluation features match the training forward pass") {
    const StubBackend backend(tiny_config());
    Rng rng(401);
    const auto batch = random_batch(rng, 3, 16);

    const Eigen::MatrixXf eval = backend.image_features(batch);
    REQUIRE(eval.rows() == 3);
    REQUIRE(eval.cols() == 5);

    std::unique_ptr<EncoderCache> cache;
    const Eigen::MatrixXf train = backend.image_features_forward(batch, 0, cache);
    REQUIRE(cache != nullptr);
    CHECK(eval == train);

    // Repeat runs are bit-identical.
    CHECK(backend.image_features(batch) == eval);
}

TEST_CASE("backward gradients match finite differences") {
    StubBackend backend(tiny_config());
    Rng rng(403);
    const auto batch = random_batch(rng, 2, 8);

    Eigen::MatrixXf probe(2, 5);
    for (Eigen::Index i = 0; i < probe.size(); ++i)
        probe.data()[i] = static_cast<float>(rng.normal());

    auto objective = [&]() {
        return static_cast<double>(
            (backend.image_features(batch).array() * probe.array()).sum());
    };

    std::set<std::string> trainable;
    for (const auto& g : backend.visual_groups()) {
        if (g.kind == GroupKind::stem) continue;
        for (const auto& p : g.params) trainable.insert(p);
    }

    std::unique_ptr<EncoderCache> cache;
    backend.image_features_forward(batch, 0, cache);
    GradMap grads;
    backend.image_features_backward(*cache, probe, trainable, grads);

    const double h = 1e-2;
    struct ProbeSite {
        const char* name;
        std::size_t index;
    };
    for (const auto& site : std::vector<ProbeSite>{{"block.0.weight", 7},
                                                   {"block.0.bias", 2},
                                                   {"block.1.weight", 20},
                                                   {"ln_post.weight", 3},
                                                   {"ln_post.bias", 0},
                                                   {"proj", 13}}) {
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
        CHECK(std::abs(an - fd) <= 2e-2 * std::max({std::abs(an), std::abs(fd), 1e-3}));
    }
}

TEST_CASE("partial cache reproduces top-block gradients exactly") {
    const StubBackend backend(tiny_config());
    Rng rng(405);
    const auto batch = random_batch(rng, 2, 8);
    Eigen::MatrixXf d_emb(2, 5);
    for (Eigen::Index i = 0; i < d_emb.size(); ++i)
        d_emb.data()[i] = static_cast<float>(rng.normal());

    const std::set<std::string> trainable{"block.1.weight", "block.1.bias", "ln_post.weight",
                                          "ln_post.bias", "proj"};

    std::unique_ptr<EncoderCache> full_cache;
    backend.image_features_forward(batch, 0, full_cache);
    GradMap full;
    backend.image_features_backward(*full_cache, d_emb, trainable, full);

    std::unique_ptr<EncoderCache> top_cache;
    backend.image_features_forward(batch, 1, top_cache);
    GradMap top;
    backend.image_features_backward(*top_cache, d_emb, trainable, top);

    REQUIRE(full.names() == top.names());
    for (const auto& name : full.names()) CHECK(full.at(name) == top.at(name));
}

TEST_CASE("backward only touches requested parameters") {
    const StubBackend backend(tiny_config());
    Rng rng(407);
    const auto batch = random_batch(rng, 1, 8);
    std::unique_ptr<EncoderCache> cache;
    backend.image_features_forward(batch, 0, cache);
    GradMap grads;
    backend.image_features_backward(*cache, Eigen::MatrixXf::Ones(1, 5), {"proj"}, grads);
    CHECK(grads.names() == std::vector<std::string>{"proj"});
}

TEST_CASE("clone is independent of the original") {
    StubBackend backend(tiny_config());
    const auto copy = backend.clone();
    CHECK(copy->kind() == "stub");
    CHECK(copy->params().content_hash() == backend.params().content_hash());

    backend.params().at("proj").values[0] += 1.0f;
    CHECK(copy->params().content_hash() != backend.params().content_hash());
}

TEST_CASE("config round-trips through json") {
    StubConfig c = tiny_config();
    c.with_text = false;
    c.logit_scale = 25.0f;
    const StubBackend backend(c);
    const StubConfig back = StubBackend::config_from_json(backend.config_json());
    CHECK(back.seed == c.seed);
    CHECK(back.embed_dim == c.embed_dim);
    CHECK(back.n_blocks == c.n_blocks);
    CHECK(back.hidden_dim == c.hidden_dim);
    CHECK(back.pool == c.pool);
    CHECK(back.with_text == c.with_text);
    CHECK(back.logit_scale == c.logit_scale);
}

TEST_CASE("text features are deterministic and prompt-sensitive") {
    const StubBackend backend(tiny_config());
    const Eigen::VectorXf a = backend.text_features("signs of pneumonia");
    const Eigen::VectorXf b = backend.text_features("signs of pneumonia");
    CHECK(a == b);
    CHECK(a.norm() > 0.0f);

    const Eigen::VectorXf other = backend.text_features("no acute findings");
    CHECK(a != other);

    // Case and surrounding whitespace do not change the embedding.
    CHECK(backend.text_features("  Signs of Pneumonia ") == a);
}

TEST_CASE("disabled text encoder refuses prompts") {
    StubConfig c = tiny_config();
    c.with_text = false;
    const StubBackend backend(c);
    CHECK_FALSE(backend.has_text_encoder());
    CHECK_THROWS_AS(backend.text_features("anything"), std::runtime_error);
}

TEST_CASE("invalid inputs are rejected") {
    CHECK_THROWS_AS(StubBackend(StubConfig{.seed = 1, .embed_dim = 0}), std::invalid_argument);
    const StubBackend backend(tiny_config());
    std::vector<Image> gray;
    gray.push_back(Image::zeros(1, 8, 8));
    CHECK_THROWS_AS(backend.image_features(gray), std::invalid_argument);
}
