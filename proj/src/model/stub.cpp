#include "cxrkit/model/stub.hpp"

#include <cmath>
#include <stdexcept>

#include "cxrkit/common.hpp"
#include "cxrkit/rng.hpp"

namespace cxrkit::model {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMat> matrix_view(const Tensor& t) {
    if (t.shape.size() != 2) throw std::invalid_argument("matrix_view: tensor is not 2-d");
    return {t.values.data(), static_cast<Eigen::Index>(t.shape[0]),
            static_cast<Eigen::Index>(t.shape[1])};
}

Eigen::Map<const Eigen::VectorXf> vector_view(const Tensor& t) {
    return {t.values.data(), static_cast<Eigen::Index>(t.size())};
}

void fill_normal(Tensor& t, Rng& rng, float stddev) {
    for (auto& v : t.values) v = static_cast<float>(rng.normal() * stddev);
}

struct StubCache : EncoderCache {
    Eigen::MatrixXf pooled;                 // batch x hidden, after ln_pre
    std::vector<Eigen::MatrixXf> block_in;  // per block: batch x hidden
    std::vector<Eigen::MatrixXf> block_tanh;
    Eigen::MatrixXf post_in;   // batch x hidden, input of ln_post
    Eigen::MatrixXf post_out;  // batch x hidden, input of proj
    int from_block = 0;
};

} // namespace

StubBackend::StubBackend(const StubConfig& config) : config_(config) {
    if (config_.embed_dim < 1 || config_.n_blocks < 0 || config_.hidden_dim < 1 ||
        config_.pool < 1) {
        throw std::invalid_argument("StubBackend: non-positive dimension in config");
    }
    const int hidden = config_.hidden_dim;
    const int patch_in = 3 * config_.pool * config_.pool;
    Rng rng(derive_seed(config_.seed, "stub_init"));

    Tensor pe = Tensor::zeros(hidden, patch_in);
    fill_normal(pe, rng, std::sqrt(1.0f / static_cast<float>(patch_in)));
    params_.add("patch_embed.weight", std::move(pe));
    params_.add("patch_embed.bias", Tensor::zeros(hidden));

    Tensor pos = Tensor::zeros(hidden);
    fill_normal(pos, rng, 0.02f);
    params_.add("pos_embed", std::move(pos));

    Tensor g_pre = Tensor::zeros(hidden);
    for (auto& v : g_pre.values) v = 1.0f;
    params_.add("ln_pre.weight", std::move(g_pre));
    params_.add("ln_pre.bias", Tensor::zeros(hidden));

    for (int b = 0; b < config_.n_blocks; ++b) {
        Tensor w = Tensor::zeros(hidden, hidden);
        fill_normal(w, rng, std::sqrt(1.0f / static_cast<float>(hidden)));
        params_.add("block." + std::to_string(b) + ".weight", std::move(w));
        params_.add("block." + std::to_string(b) + ".bias", Tensor::zeros(hidden));
    }

    Tensor g_post = Tensor::zeros(hidden);
    for (auto& v : g_post.values) v = 1.0f;
    params_.add("ln_post.weight", std::move(g_post));
    params_.add("ln_post.bias", Tensor::zeros(hidden));

    Tensor proj = Tensor::zeros(config_.embed_dim, hidden);
    fill_normal(proj, rng, std::sqrt(1.0f / static_cast<float>(hidden)));
    params_.add("proj", std::move(proj));
}

StubBackend::StubBackend(const StubConfig& config, ParamStore params)
    : config_(config), params_(std::move(params)) {
    const int hidden = config_.hidden_dim;
    const auto& pe = params_.at("patch_embed.weight");
    if (pe.shape.size() != 2 || pe.shape[0] != hidden ||
        pe.shape[1] != 3 * config_.pool * config_.pool) {
        throw std::invalid_argument("StubBackend: parameter shapes do not match config");
    }
}

std::vector<ParamGroup> StubBackend::visual_groups() const {
    std::vector<ParamGroup> groups;
    groups.push_back({"stem", GroupKind::stem, -1,
                      {"patch_embed.weight", "patch_embed.bias", "pos_embed",
                       "ln_pre.weight", "ln_pre.bias"}});
    for (int b = 0; b < config_.n_blocks; ++b) {
        const std::string prefix = "block." + std::to_string(b);
        groups.push_back({prefix, GroupKind::block, b, {prefix + ".weight", prefix + ".bias"}});
    }
    groups.push_back({"ln_post", GroupKind::post_norm, -1, {"ln_post.weight", "ln_post.bias"}});
    groups.push_back({"proj", GroupKind::projection, -1, {"proj"}});
    return groups;
}

Eigen::VectorXf StubBackend::downsample(const data::Image& image) const {
    if (image.channels != 3 || image.height < 1 || image.width < 1) {
        throw std::invalid_argument("StubBackend: expected non-empty 3-channel image");
    }
    const int p = config_.pool;
    Eigen::VectorXf out(3 * p * p);
    for (int c = 0; c < 3; ++c) {
        for (int gy = 0; gy < p; ++gy) {
            const int y0 = static_cast<int>(static_cast<std::int64_t>(gy) * image.height / p);
            const int y1 = static_cast<int>(static_cast<std::int64_t>(gy + 1) * image.height / p);
            for (int gx = 0; gx < p; ++gx) {
                const int x0 = static_cast<int>(static_cast<std::int64_t>(gx) * image.width / p);
                const int x1 =
                    static_cast<int>(static_cast<std::int64_t>(gx + 1) * image.width / p);
                double acc = 0.0;
                int count = 0;
                for (int y = y0; y < std::max(y1, y0 + 1); ++y) {
                    const int yy = std::min(y, image.height - 1);
                    for (int x = x0; x < std::max(x1, x0 + 1); ++x) {
                        const int xx = std::min(x, image.width - 1);
                        acc += image.at(c, yy, xx);
                        ++count;
                    }
                }
                out[(c * p + gy) * p + gx] = static_cast<float>(acc / count);
            }
        }
    }
    return out;
}

Eigen::MatrixXf StubBackend::image_features(const std::vector<data::Image>& batch) const {
    std::unique_ptr<EncoderCache> cache;
    return image_features_forward(batch, num_blocks() + 1, cache);
}

Eigen::MatrixXf StubBackend::image_features_forward(const std::vector<data::Image>& batch,
                                                    int cache_from_block,
                                                    std::unique_ptr<EncoderCache>& cache) const {
    const int n = static_cast<int>(batch.size());
    const int hidden = config_.hidden_dim;
    const bool want_cache = cache_from_block <= num_blocks();

    auto state = std::make_unique<StubCache>();
    state->from_block = std::max(cache_from_block, 0);

    const auto g_pre = vector_view(params_.at("ln_pre.weight"));
    const auto b_pre = vector_view(params_.at("ln_pre.bias"));
    const auto pos = vector_view(params_.at("pos_embed"));
    const auto w_pe = matrix_view(params_.at("patch_embed.weight"));
    const auto b_pe = vector_view(params_.at("patch_embed.bias"));

    Eigen::MatrixXf h(n, hidden);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXf phi = downsample(batch[static_cast<std::size_t>(i)]);
        Eigen::VectorXf h0 = w_pe * phi + b_pe + pos;
        h.row(i) = (h0.array() * g_pre.array() + b_pre.array()).matrix().transpose();
    }

    if (want_cache) {
        state->block_in.resize(static_cast<std::size_t>(num_blocks()));
        state->block_tanh.resize(static_cast<std::size_t>(num_blocks()));
    }
    for (int b = 0; b < num_blocks(); ++b) {
        const auto w = matrix_view(params_.at("block." + std::to_string(b) + ".weight"));
        const auto bias = vector_view(params_.at("block." + std::to_string(b) + ".bias"));
        Eigen::MatrixXf t =
            ((h * w.transpose()).rowwise() + bias.transpose()).array().tanh().matrix();
        if (want_cache && b >= state->from_block) {
            state->block_in[static_cast<std::size_t>(b)] = h;
            state->block_tanh[static_cast<std::size_t>(b)] = t;
        }
        h += t;
    }

    const auto g_post = vector_view(params_.at("ln_post.weight"));
    const auto b_post = vector_view(params_.at("ln_post.bias"));
    Eigen::MatrixXf hp =
        ((h.array().rowwise() * g_post.transpose().array()).rowwise() + b_post.transpose().array())
            .matrix();
    const auto proj = matrix_view(params_.at("proj"));
    Eigen::MatrixXf out = hp * proj.transpose();

    if (want_cache) {
        state->post_in = std::move(h);
        state->post_out = std::move(hp);
        cache = std::move(state);
    }
    return out;
}

void StubBackend::image_features_backward(const EncoderCache& cache,
                                          const Eigen::MatrixXf& d_embeddings,
                                          const std::set<std::string>& trainable,
                                          GradMap& grads) const {
    const auto& state = dynamic_cast<const StubCache&>(cache);
    const int hidden = config_.hidden_dim;

    const auto proj = matrix_view(params_.at("proj"));
    if (trainable.count("proj") != 0) {
        Eigen::Map<RowMat> g(grads.accumulate("proj", params_.at("proj").size()).data(),
                             config_.embed_dim, hidden);
        g.noalias() += d_embeddings.transpose() * state.post_out;
    }
    Eigen::MatrixXf d_hp = d_embeddings * proj;

    const auto g_post = vector_view(params_.at("ln_post.weight"));
    if (trainable.count("ln_post.weight") != 0) {
        Eigen::Map<Eigen::VectorXf> g(grads.accumulate("ln_post.weight", hidden).data(), hidden);
        g += (d_hp.array() * state.post_in.array()).colwise().sum().matrix().transpose();
    }
    if (trainable.count("ln_post.bias") != 0) {
        Eigen::Map<Eigen::VectorXf> g(grads.accumulate("ln_post.bias", hidden).data(), hidden);
        g += d_hp.colwise().sum().transpose();
    }
    Eigen::MatrixXf d_h = (d_hp.array().rowwise() * g_post.transpose().array()).matrix();

    for (int b = num_blocks() - 1; b >= state.from_block; --b) {
        const auto& t = state.block_tanh[static_cast<std::size_t>(b)];
        const auto& h_in = state.block_in[static_cast<std::size_t>(b)];
        Eigen::MatrixXf d_u = (d_h.array() * (1.0f - t.array().square())).matrix();
        const std::string prefix = "block." + std::to_string(b);
        if (trainable.count(prefix + ".weight") != 0) {
            Eigen::Map<RowMat> g(
                grads.accumulate(prefix + ".weight", params_.at(prefix + ".weight").size()).data(),
                hidden, hidden);
            g.noalias() += d_u.transpose() * h_in;
        }
        if (trainable.count(prefix + ".bias") != 0) {
            Eigen::Map<Eigen::VectorXf> g(grads.accumulate(prefix + ".bias", hidden).data(), hidden);
            g += d_u.colwise().sum().transpose();
        }
        const auto w = matrix_view(params_.at(prefix + ".weight"));
        d_h += d_u * w;
    }
}

Eigen::VectorXf StubBackend::text_features(const std::string& prompt) const {
    if (!config_.with_text) throw std::runtime_error("StubBackend: text encoder disabled");
    const int dim = config_.embed_dim;
    const float scale = 1.0f / std::sqrt(static_cast<float>(dim));
    auto seeded_vector = [&](std::uint64_t seed, Eigen::VectorXf& acc) {
        Rng rng(seed);
        for (int i = 0; i < dim; ++i) acc[i] += static_cast<float>(rng.normal()) * scale;
    };

    const std::string text = to_lower(trim(prompt));
    Eigen::VectorXf out = Eigen::VectorXf::Zero(dim);
    seeded_vector(derive_seed(config_.seed, "text:str:" + text), out);
    std::string token;
    auto flush = [&] {
        if (!token.empty()) {
            seeded_vector(derive_seed(config_.seed, "text:tok:" + token), out);
            token.clear();
        }
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c)) != 0) {
            token.push_back(c);
        } else {
            flush();
        }
    }
    flush();
    return out;
}

nlohmann::json StubBackend::config_json() const {
    return {{"seed", config_.seed},          {"embed_dim", config_.embed_dim},
            {"n_blocks", config_.n_blocks},  {"hidden_dim", config_.hidden_dim},
            {"pool", config_.pool},          {"with_text", config_.with_text},
            {"logit_scale", config_.logit_scale}};
}

StubConfig StubBackend::config_from_json(const nlohmann::json& j) {
    StubConfig config;
    config.seed = j.value("seed", config.seed);
    config.embed_dim = j.value("embed_dim", config.embed_dim);
    config.n_blocks = j.value("n_blocks", config.n_blocks);
    config.hidden_dim = j.value("hidden_dim", config.hidden_dim);
    config.pool = j.value("pool", config.pool);
    config.with_text = j.value("with_text", config.with_text);
    config.logit_scale = j.value("logit_scale", config.logit_scale);
    return config;
}

std::unique_ptr<EncoderBackend> StubBackend::clone() const {
    auto copy = std::make_unique<StubBackend>(config_);
    copy->params_ = params_;
    return copy;
}

} // namespace cxrkit::model
