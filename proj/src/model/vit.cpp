#include "cxrkit/model/vit.hpp"

#include <cmath>
#include <stdexcept>

#include "cxrkit/common.hpp"
#include "cxrkit/model/nn_ops.hpp"
#include "cxrkit/rng.hpp"

namespace cxrkit::model {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMat> mat_view(const Tensor& t, Eigen::Index rows, Eigen::Index cols) {
    if (t.size() != rows * cols) throw std::invalid_argument("tensor size/view mismatch");
    return {t.values.data(), rows, cols};
}

Eigen::Map<const Eigen::VectorXf> vec_view(const Tensor& t) {
    return {t.values.data(), static_cast<Eigen::Index>(t.size())};
}

std::string block_prefix(const std::string& tower, int index) {
    return tower + "transformer.resblocks." + std::to_string(index) + ".";
}

struct BlockCache {
    Eigen::MatrixXf hat1, hat2;
    Eigen::VectorXf inv1, inv2;
    Eigen::MatrixXf ln1_out;
    Eigen::MatrixXf qkv;
    std::vector<Eigen::MatrixXf> probs;
    Eigen::MatrixXf attn_concat;
    Eigen::MatrixXf x_mid;
    Eigen::MatrixXf ln2_out;
    Eigen::MatrixXf mlp_pre;
    Eigen::MatrixXf mlp_act;
};

struct VitCache : EncoderCache {
    int from_block = 0;
    // One slot per image; block caches start at from_block.
    std::vector<std::vector<BlockCache>> blocks;
    std::vector<Eigen::RowVectorXf> cls_hat;
    std::vector<float> cls_inv;
    std::vector<Eigen::RowVectorXf> cls_out;  // ln_post output (input of proj)
};

// Pre-norm transformer block; returns the block output. `cache` may be
// null for inference-only passes.
Eigen::MatrixXf block_forward(const ParamStore& params, const std::string& prefix, int width,
                              int heads, bool causal, const Eigen::MatrixXf& x,
                              BlockCache* cache) {
    const Eigen::Index tokens = x.rows();
    const int head_dim = width / heads;
    const float scale = 1.0f / std::sqrt(static_cast<float>(head_dim));

    const auto g1 = vec_view(params.at(prefix + "ln_1.weight"));
    const auto b1 = vec_view(params.at(prefix + "ln_1.bias"));
    const auto w_qkv = mat_view(params.at(prefix + "attn.in_proj_weight"), 3 * width, width);
    const auto b_qkv = vec_view(params.at(prefix + "attn.in_proj_bias"));
    const auto w_out = mat_view(params.at(prefix + "attn.out_proj.weight"), width, width);
    const auto b_out = vec_view(params.at(prefix + "attn.out_proj.bias"));
    const auto g2 = vec_view(params.at(prefix + "ln_2.weight"));
    const auto b2 = vec_view(params.at(prefix + "ln_2.bias"));
    const auto w_fc = mat_view(params.at(prefix + "mlp.c_fc.weight"),
                               params.at(prefix + "mlp.c_fc.weight").shape[0], width);
    const auto b_fc = vec_view(params.at(prefix + "mlp.c_fc.bias"));
    const auto w_proj = mat_view(params.at(prefix + "mlp.c_proj.weight"), width,
                                 params.at(prefix + "mlp.c_fc.weight").shape[0]);
    const auto b_proj = vec_view(params.at(prefix + "mlp.c_proj.bias"));

    Eigen::MatrixXf hat1;
    Eigen::VectorXf inv1;
    Eigen::MatrixXf ln1_out = ops::layer_norm(x, g1, b1, hat1, inv1);
    Eigen::MatrixXf qkv = (ln1_out * w_qkv.transpose()).rowwise() + b_qkv.transpose();

    Eigen::MatrixXf attn_concat(tokens, width);
    std::vector<Eigen::MatrixXf> probs;
    if (cache != nullptr) probs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        const auto q = qkv.block(0, h * head_dim, tokens, head_dim);
        const auto k = qkv.block(0, width + h * head_dim, tokens, head_dim);
        const auto v = qkv.block(0, 2 * width + h * head_dim, tokens, head_dim);
        Eigen::MatrixXf scores = (q * k.transpose()) * scale;
        if (causal) {
            for (Eigen::Index i = 0; i < tokens; ++i) {
                for (Eigen::Index j = i + 1; j < tokens; ++j) {
                    scores(i, j) = -std::numeric_limits<float>::infinity();
                }
            }
        }
        ops::softmax_rows(scores);
        attn_concat.block(0, h * head_dim, tokens, head_dim) = scores * v;
        if (cache != nullptr) probs.push_back(std::move(scores));
    }
    Eigen::MatrixXf x_mid =
        x + ((attn_concat * w_out.transpose()).rowwise() + b_out.transpose()).matrix();

    Eigen::MatrixXf hat2;
    Eigen::VectorXf inv2;
    Eigen::MatrixXf ln2_out = ops::layer_norm(x_mid, g2, b2, hat2, inv2);
    Eigen::MatrixXf mlp_pre = (ln2_out * w_fc.transpose()).rowwise() + b_fc.transpose();
    Eigen::MatrixXf mlp_act = mlp_pre.unaryExpr([](float v) { return ops::quick_gelu(v); });
    Eigen::MatrixXf out =
        x_mid + ((mlp_act * w_proj.transpose()).rowwise() + b_proj.transpose()).matrix();

    if (cache != nullptr) {
        cache->hat1 = std::move(hat1);
        cache->inv1 = std::move(inv1);
        cache->hat2 = std::move(hat2);
        cache->inv2 = std::move(inv2);
        cache->ln1_out = std::move(ln1_out);
        cache->qkv = std::move(qkv);
        cache->probs = std::move(probs);
        cache->attn_concat = std::move(attn_concat);
        cache->x_mid = std::move(x_mid);
        cache->ln2_out = std::move(ln2_out);
        cache->mlp_pre = std::move(mlp_pre);
        cache->mlp_act = std::move(mlp_act);
    }
    return out;
}

// Accumulates parameter gradients (only for names in `trainable`) and
// returns d(loss)/d(block input).
Eigen::MatrixXf block_backward(const ParamStore& params, const std::string& prefix, int width,
                               int heads, const BlockCache& cache, const Eigen::MatrixXf& d_out,
                               const std::set<std::string>& trainable, GradMap& grads) {
    const Eigen::Index tokens = d_out.rows();
    const int head_dim = width / heads;
    const float scale = 1.0f / std::sqrt(static_cast<float>(head_dim));
    const int mlp_dim = static_cast<int>(params.at(prefix + "mlp.c_fc.weight").shape[0]);

    const auto g1 = vec_view(params.at(prefix + "ln_1.weight"));
    const auto w_qkv = mat_view(params.at(prefix + "attn.in_proj_weight"), 3 * width, width);
    const auto w_out = mat_view(params.at(prefix + "attn.out_proj.weight"), width, width);
    const auto g2 = vec_view(params.at(prefix + "ln_2.weight"));
    const auto w_fc = mat_view(params.at(prefix + "mlp.c_fc.weight"), mlp_dim, width);
    const auto w_proj = mat_view(params.at(prefix + "mlp.c_proj.weight"), width, mlp_dim);

    auto add_matrix = [&](const std::string& name, const Eigen::MatrixXf& g) {
        if (trainable.count(name) == 0) return;
        const auto& t = params.at(name);
        Eigen::Map<RowMat>(grads.accumulate(name, static_cast<std::size_t>(t.size())).data(),
                           g.rows(), g.cols()) += g;
    };
    auto add_vector = [&](const std::string& name, const Eigen::VectorXf& g) {
        if (trainable.count(name) == 0) return;
        const auto& t = params.at(name);
        Eigen::Map<Eigen::VectorXf>(
            grads.accumulate(name, static_cast<std::size_t>(t.size())).data(), g.size()) += g;
    };

    // MLP branch.
    const Eigen::MatrixXf& d_block_out = d_out;
    add_matrix(prefix + "mlp.c_proj.weight", d_block_out.transpose() * cache.mlp_act);
    add_vector(prefix + "mlp.c_proj.bias", d_block_out.colwise().sum().transpose());
    Eigen::MatrixXf d_act = d_block_out * w_proj;
    Eigen::MatrixXf d_pre = d_act.cwiseProduct(
        cache.mlp_pre.unaryExpr([](float v) { return ops::quick_gelu_grad(v); }));
    add_matrix(prefix + "mlp.c_fc.weight", d_pre.transpose() * cache.ln2_out);
    add_vector(prefix + "mlp.c_fc.bias", d_pre.colwise().sum().transpose());
    Eigen::MatrixXf d_ln2 = d_pre * w_fc;
    add_vector(prefix + "ln_2.weight", d_ln2.cwiseProduct(cache.hat2).colwise().sum().transpose());
    add_vector(prefix + "ln_2.bias", d_ln2.colwise().sum().transpose());
    Eigen::MatrixXf d_x_mid =
        d_block_out + ops::layer_norm_backward(d_ln2, cache.hat2, cache.inv2, g2);

    // Attention branch.
    add_matrix(prefix + "attn.out_proj.weight", d_x_mid.transpose() * cache.attn_concat);
    add_vector(prefix + "attn.out_proj.bias", d_x_mid.colwise().sum().transpose());
    Eigen::MatrixXf d_concat = d_x_mid * w_out;

    Eigen::MatrixXf d_qkv = Eigen::MatrixXf::Zero(tokens, 3 * width);
    for (int h = 0; h < heads; ++h) {
        const auto q = cache.qkv.block(0, h * head_dim, tokens, head_dim);
        const auto k = cache.qkv.block(0, width + h * head_dim, tokens, head_dim);
        const auto v = cache.qkv.block(0, 2 * width + h * head_dim, tokens, head_dim);
        const auto& p = cache.probs[static_cast<std::size_t>(h)];
        const auto d_o = d_concat.block(0, h * head_dim, tokens, head_dim);

        Eigen::MatrixXf d_p = d_o * v.transpose();
        d_qkv.block(0, 2 * width + h * head_dim, tokens, head_dim) = p.transpose() * d_o;
        // Softmax backward; masked positions carry p == 0 and drop out.
        Eigen::VectorXf row_dot = (d_p.cwiseProduct(p)).rowwise().sum();
        Eigen::MatrixXf d_s = p.cwiseProduct(d_p.colwise() - row_dot);
        d_qkv.block(0, h * head_dim, tokens, head_dim) = (d_s * k) * scale;
        d_qkv.block(0, width + h * head_dim, tokens, head_dim) = (d_s.transpose() * q) * scale;
    }
    add_matrix(prefix + "attn.in_proj_weight", d_qkv.transpose() * cache.ln1_out);
    add_vector(prefix + "attn.in_proj_bias", d_qkv.colwise().sum().transpose());
    Eigen::MatrixXf d_ln1 = d_qkv * w_qkv;
    add_vector(prefix + "ln_1.weight", d_ln1.cwiseProduct(cache.hat1).colwise().sum().transpose());
    add_vector(prefix + "ln_1.bias", d_ln1.colwise().sum().transpose());
    return d_x_mid + ops::layer_norm_backward(d_ln1, cache.hat1, cache.inv1, g1);
}

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(),
                                                  suffix) == 0;
}

// Seeded initialization dispatched on the tensor's role in the registry.
void init_tensor(const std::string& name, Tensor& t, Rng& rng) {
    auto fill_normal = [&](float stddev) {
        for (auto& v : t.values) v = static_cast<float>(rng.normal()) * stddev;
    };
    if (name == "logit_scale") {
        t.values[0] = std::log(100.0f);
        return;
    }
    if (ends_with(name, "ln_1.weight") || ends_with(name, "ln_2.weight") ||
        ends_with(name, "ln_pre.weight") || ends_with(name, "ln_post.weight") ||
        ends_with(name, "ln_final.weight")) {
        for (auto& v : t.values) v = 1.0f;
        return;
    }
    if (ends_with(name, ".bias")) return;  // stays zero
    if (name == "visual.class_embedding" || name == "visual.positional_embedding" ||
        name == "token_embedding.weight" || name == "positional_embedding") {
        fill_normal(0.02f);
        return;
    }
    if (name == "visual.proj" || name == "text_projection") {
        // Applied as x * proj: fan-in is the leading dimension.
        fill_normal(std::sqrt(1.0f / static_cast<float>(t.shape[0])));
        return;
    }
    if (ends_with(name, "mlp.c_fc.weight")) {
        fill_normal(std::sqrt(2.0f / static_cast<float>(t.shape[1])));
        return;
    }
    // conv1 and remaining 2-d weights: 1/fan_in.
    std::int64_t fan_in = 1;
    for (std::size_t d = 1; d < t.shape.size(); ++d) fan_in *= t.shape[d];
    fill_normal(std::sqrt(1.0f / static_cast<float>(fan_in)));
}

void append_block_tensors(std::vector<std::pair<std::string, std::vector<std::int64_t>>>& out,
                          const std::string& prefix, std::int64_t width, std::int64_t mlp_dim) {
    out.push_back({prefix + "ln_1.weight", {width}});
    out.push_back({prefix + "ln_1.bias", {width}});
    out.push_back({prefix + "attn.in_proj_weight", {3 * width, width}});
    out.push_back({prefix + "attn.in_proj_bias", {3 * width}});
    out.push_back({prefix + "attn.out_proj.weight", {width, width}});
    out.push_back({prefix + "attn.out_proj.bias", {width}});
    out.push_back({prefix + "ln_2.weight", {width}});
    out.push_back({prefix + "ln_2.bias", {width}});
    out.push_back({prefix + "mlp.c_fc.weight", {mlp_dim, width}});
    out.push_back({prefix + "mlp.c_fc.bias", {mlp_dim}});
    out.push_back({prefix + "mlp.c_proj.weight", {width, mlp_dim}});
    out.push_back({prefix + "mlp.c_proj.bias", {width}});
}

} // namespace

std::vector<std::pair<std::string, std::vector<std::int64_t>>> VitBackend::expected_tensors(
    const VitConfig& config) {
    const std::int64_t w = config.width;
    const std::int64_t grid = config.image_size / config.patch_size;
    std::vector<std::pair<std::string, std::vector<std::int64_t>>> out;
    out.push_back({"visual.class_embedding", {w}});
    out.push_back({"visual.conv1.weight", {w, 3, config.patch_size, config.patch_size}});
    out.push_back({"visual.positional_embedding", {grid * grid + 1, w}});
    out.push_back({"visual.ln_pre.weight", {w}});
    out.push_back({"visual.ln_pre.bias", {w}});
    for (int i = 0; i < config.layers; ++i) {
        append_block_tensors(out, block_prefix("visual.", i), w, config.mlp_ratio * w);
    }
    out.push_back({"visual.ln_post.weight", {w}});
    out.push_back({"visual.ln_post.bias", {w}});
    out.push_back({"visual.proj", {w, config.embed_dim}});
    if (config.with_text) {
        const std::int64_t tw = config.text_width;
        out.push_back({"token_embedding.weight", {config.vocab_size, tw}});
        out.push_back({"positional_embedding", {config.context_length, tw}});
        for (int i = 0; i < config.text_layers; ++i) {
            append_block_tensors(out, block_prefix("", i), tw, config.mlp_ratio * tw);
        }
        out.push_back({"ln_final.weight", {tw}});
        out.push_back({"ln_final.bias", {tw}});
        out.push_back({"text_projection", {tw, config.embed_dim}});
    }
    out.push_back({"logit_scale", {}});
    return out;
}

VitBackend::VitBackend(const VitConfig& config) : config_(config) {
    if (config_.image_size % config_.patch_size != 0) {
        throw std::invalid_argument("image_size must be a multiple of patch_size");
    }
    if (config_.width % config_.heads != 0) {
        throw std::invalid_argument("width must be a multiple of heads");
    }
    if (config_.with_text && config_.text_width % config_.text_heads != 0) {
        throw std::invalid_argument("text_width must be a multiple of text_heads");
    }
    Rng rng(derive_seed(config_.seed, "vit_init"));
    for (auto& [name, shape] : expected_tensors(config_)) {
        Tensor t = Tensor::zeros(shape);
        init_tensor(name, t, rng);
        params_.add(name, std::move(t));
    }
    load_tokenizer();
}

VitBackend::VitBackend(const VitConfig& config, ParamStore params)
    : config_(config), params_(std::move(params)) {
    validate_shapes();
    load_tokenizer();
}

void VitBackend::load_tokenizer() {
    if (config_.with_text && !config_.tokenizer_path.empty()) {
        tokenizer_ = std::make_shared<const BpeTokenizer>(config_.tokenizer_path);
    }
}

void VitBackend::validate_shapes() const {
    for (const auto& [name, shape] : expected_tensors(config_)) {
        if (!params_.has(name)) throw DataError("weights are missing tensor \"" + name + "\"");
        if (params_.at(name).shape != shape) {
            throw DataError("tensor \"" + name + "\" has an unexpected shape");
        }
    }
    if (params_.has(block_prefix("visual.", config_.layers) + "ln_1.weight")) {
        throw DataError("weights contain more visual blocks than the config declares");
    }
}

std::unique_ptr<VitBackend> VitBackend::from_weights_file(const std::filesystem::path& weights,
                                                          const std::string& tokenizer_path) {
    TensorFile file = read_tensor_file(weights);
    VitConfig config = infer_config(file);
    config.tokenizer_path = tokenizer_path;
    ParamStore params;
    for (auto& [name, shape] : expected_tensors(config)) {
        const auto it = file.tensors.find(name);
        if (it == file.tensors.end()) {
            throw DataError(weights.string() + ": missing tensor \"" + name + "\"");
        }
        // Some exports store the scale as shape [1] rather than a scalar.
        if (name == "logit_scale" && it->second.shape == std::vector<std::int64_t>{1}) {
            it->second.shape.clear();
        }
        if (it->second.shape != shape) {
            throw DataError(weights.string() + ": tensor \"" + name + "\" has unexpected shape");
        }
        params.add(name, std::move(it->second));
    }
    return std::make_unique<VitBackend>(config, std::move(params));
}

VitConfig VitBackend::infer_config(const TensorFile& file) {
    VitConfig config;
    const Tensor& conv = file.at("visual.conv1.weight");
    if (conv.shape.size() != 4 || conv.shape[1] != 3) {
        throw DataError("visual.conv1.weight: expected a [width, 3, patch, patch] tensor");
    }
    config.width = static_cast<int>(conv.shape[0]);
    config.patch_size = static_cast<int>(conv.shape[3]);
    const Tensor& pos = file.at("visual.positional_embedding");
    const int grid = static_cast<int>(std::lround(std::sqrt(static_cast<double>(pos.shape[0] - 1))));
    if (static_cast<std::int64_t>(grid) * grid + 1 != pos.shape[0]) {
        throw DataError("visual.positional_embedding: token count is not a square grid + 1");
    }
    config.image_size = grid * config.patch_size;
    config.embed_dim = static_cast<int>(file.at("visual.proj").shape[1]);
    config.layers = 0;
    while (file.has(block_prefix("visual.", config.layers) + "ln_1.weight")) ++config.layers;
    if (config.layers == 0) throw DataError("weights contain no visual transformer blocks");
    config.heads = std::max(1, config.width / 64);
    config.mlp_ratio =
        static_cast<int>(file.at(block_prefix("visual.", 0) + "mlp.c_fc.weight").shape[0] /
                         config.width);

    config.with_text = file.has("token_embedding.weight");
    if (config.with_text) {
        config.vocab_size = static_cast<int>(file.at("token_embedding.weight").shape[0]);
        config.text_width = static_cast<int>(file.at("token_embedding.weight").shape[1]);
        config.context_length = static_cast<int>(file.at("positional_embedding").shape[0]);
        config.text_layers = 0;
        while (file.has(block_prefix("", config.text_layers) + "ln_1.weight")) {
            ++config.text_layers;
        }
        config.text_heads = std::max(1, config.text_width / 64);
    }
    return config;
}

std::vector<ParamGroup> VitBackend::visual_groups() const {
    std::vector<ParamGroup> groups;
    groups.push_back({"visual.stem", GroupKind::stem, -1,
                      {"visual.class_embedding", "visual.conv1.weight",
                       "visual.positional_embedding", "visual.ln_pre.weight",
                       "visual.ln_pre.bias"}});
    for (int i = 0; i < config_.layers; ++i) {
        const std::string prefix = block_prefix("visual.", i);
        groups.push_back({"visual.block." + std::to_string(i), GroupKind::block, i,
                          {prefix + "ln_1.weight", prefix + "ln_1.bias",
                           prefix + "attn.in_proj_weight", prefix + "attn.in_proj_bias",
                           prefix + "attn.out_proj.weight", prefix + "attn.out_proj.bias",
                           prefix + "ln_2.weight", prefix + "ln_2.bias",
                           prefix + "mlp.c_fc.weight", prefix + "mlp.c_fc.bias",
                           prefix + "mlp.c_proj.weight", prefix + "mlp.c_proj.bias"}});
    }
    groups.push_back({"visual.ln_post", GroupKind::post_norm, -1,
                      {"visual.ln_post.weight", "visual.ln_post.bias"}});
    groups.push_back({"visual.proj", GroupKind::projection, -1, {"visual.proj"}});
    return groups;
}

Eigen::MatrixXf VitBackend::embed_image(const data::Image& image) const {
    if (image.channels != 3 || image.height != config_.image_size ||
        image.width != config_.image_size) {
        throw std::invalid_argument("VitBackend: image must be 3 x " +
                                    std::to_string(config_.image_size) + " x " +
                                    std::to_string(config_.image_size));
    }
    const int p = config_.patch_size;
    const int grid = config_.image_size / p;
    const int tokens = grid * grid + 1;
    const int w = config_.width;
    const int patch_dim = 3 * p * p;

    const auto conv = mat_view(params_.at("visual.conv1.weight"), w, patch_dim);
    const auto cls = vec_view(params_.at("visual.class_embedding"));
    const auto pos = mat_view(params_.at("visual.positional_embedding"), tokens, w);

    Eigen::MatrixXf x(tokens, w);
    x.row(0) = cls.transpose();
    Eigen::VectorXf patch(patch_dim);
    for (int py = 0; py < grid; ++py) {
        for (int px = 0; px < grid; ++px) {
            for (int c = 0; c < 3; ++c) {
                for (int dy = 0; dy < p; ++dy) {
                    for (int dx = 0; dx < p; ++dx) {
                        patch[(c * p + dy) * p + dx] = image.at(c, py * p + dy, px * p + dx);
                    }
                }
            }
            x.row(1 + py * grid + px) = (conv * patch).transpose();
        }
    }
    x += pos;
    return x;
}

Eigen::MatrixXf VitBackend::image_features(const std::vector<data::Image>& batch) const {
    std::unique_ptr<EncoderCache> cache;
    return image_features_forward(batch, config_.layers + 1, cache);
}

Eigen::MatrixXf VitBackend::image_features_forward(const std::vector<data::Image>& batch,
                                                   int cache_from_block,
                                                   std::unique_ptr<EncoderCache>& cache) const {
    const int n = static_cast<int>(batch.size());
    const bool want_cache = cache_from_block <= config_.layers;
    const int from_block = std::max(cache_from_block, 0);

    auto state = std::make_unique<VitCache>();
    state->from_block = from_block;
    if (want_cache) {
        state->blocks.resize(static_cast<std::size_t>(n));
        state->cls_hat.resize(static_cast<std::size_t>(n));
        state->cls_inv.resize(static_cast<std::size_t>(n));
        state->cls_out.resize(static_cast<std::size_t>(n));
    }

    const auto g_pre = vec_view(params_.at("visual.ln_pre.weight"));
    const auto b_pre = vec_view(params_.at("visual.ln_pre.bias"));
    const auto g_post = vec_view(params_.at("visual.ln_post.weight"));
    const auto b_post = vec_view(params_.at("visual.ln_post.bias"));
    const auto proj = mat_view(params_.at("visual.proj"), config_.width, config_.embed_dim);

    Eigen::MatrixXf features(n, config_.embed_dim);
    for (int i = 0; i < n; ++i) {
        Eigen::MatrixXf tokens = embed_image(batch[static_cast<std::size_t>(i)]);
        Eigen::MatrixXf hat;
        Eigen::VectorXf inv;
        Eigen::MatrixXf x = ops::layer_norm(tokens, g_pre, b_pre, hat, inv);

        if (want_cache) {
            state->blocks[static_cast<std::size_t>(i)].resize(
                static_cast<std::size_t>(config_.layers - from_block));
        }
        for (int b = 0; b < config_.layers; ++b) {
            BlockCache* block_cache = nullptr;
            if (want_cache && b >= from_block) {
                block_cache =
                    &state->blocks[static_cast<std::size_t>(i)][static_cast<std::size_t>(b - from_block)];
            }
            x = block_forward(params_, block_prefix("visual.", b), config_.width, config_.heads,
                              false, x, block_cache);
        }

        // Only the class token reaches the projection.
        Eigen::MatrixXf cls_row = x.row(0);
        Eigen::MatrixXf cls_hat;
        Eigen::VectorXf cls_inv;
        Eigen::MatrixXf cls_out = ops::layer_norm(cls_row, g_post, b_post, cls_hat, cls_inv);
        features.row(i) = cls_out.row(0) * proj;
        if (want_cache) {
            state->cls_hat[static_cast<std::size_t>(i)] = cls_hat.row(0);
            state->cls_inv[static_cast<std::size_t>(i)] = cls_inv[0];
            state->cls_out[static_cast<std::size_t>(i)] = cls_out.row(0);
        }
    }
    if (want_cache) cache = std::move(state);
    return features;
}

void VitBackend::image_features_backward(const EncoderCache& cache,
                                         const Eigen::MatrixXf& d_embeddings,
                                         const std::set<std::string>& trainable,
                                         GradMap& grads) const {
    const auto& state = dynamic_cast<const VitCache&>(cache);
    const int n = static_cast<int>(d_embeddings.rows());
    const int w = config_.width;
    const int tokens = (config_.image_size / config_.patch_size) *
                           (config_.image_size / config_.patch_size) +
                       1;

    const auto proj = mat_view(params_.at("visual.proj"), w, config_.embed_dim);
    const auto g_post = vec_view(params_.at("visual.ln_post.weight"));

    for (int i = 0; i < n; ++i) {
        const auto& cls_out = state.cls_out[static_cast<std::size_t>(i)];
        const Eigen::RowVectorXf d_e = d_embeddings.row(i);

        if (trainable.count("visual.proj") != 0) {
            const auto& t = params_.at("visual.proj");
            Eigen::Map<RowMat> g(
                grads.accumulate("visual.proj", static_cast<std::size_t>(t.size())).data(), w,
                config_.embed_dim);
            g.noalias() += cls_out.transpose() * d_e;
        }
        Eigen::MatrixXf d_cls_out = (proj * d_e.transpose()).transpose();  // 1 x w

        const auto& cls_hat = state.cls_hat[static_cast<std::size_t>(i)];
        if (trainable.count("visual.ln_post.weight") != 0) {
            Eigen::Map<Eigen::VectorXf> g(
                grads.accumulate("visual.ln_post.weight", static_cast<std::size_t>(w)).data(), w);
            g += d_cls_out.row(0).cwiseProduct(cls_hat).transpose();
        }
        if (trainable.count("visual.ln_post.bias") != 0) {
            Eigen::Map<Eigen::VectorXf> g(
                grads.accumulate("visual.ln_post.bias", static_cast<std::size_t>(w)).data(), w);
            g += d_cls_out.row(0).transpose();
        }
        Eigen::MatrixXf hat_m = cls_hat;
        Eigen::VectorXf inv_v(1);
        inv_v[0] = state.cls_inv[static_cast<std::size_t>(i)];
        Eigen::MatrixXf d_cls_in = ops::layer_norm_backward(d_cls_out, hat_m, inv_v, g_post);

        Eigen::MatrixXf d_x = Eigen::MatrixXf::Zero(tokens, w);
        d_x.row(0) = d_cls_in.row(0);
        for (int b = config_.layers - 1; b >= state.from_block; --b) {
            const auto& block_cache =
                state.blocks[static_cast<std::size_t>(i)][static_cast<std::size_t>(b - state.from_block)];
            d_x = block_backward(params_, block_prefix("visual.", b), w, config_.heads,
                                 block_cache, d_x, trainable, grads);
        }
    }
}

Eigen::VectorXf VitBackend::text_features(const std::string& prompt) const {
    if (!has_text_encoder()) {
        throw std::runtime_error("VitBackend: text encoder unavailable (no tokenizer loaded)");
    }
    const int tw = config_.text_width;
    const int ctx = config_.context_length;
    const std::vector<std::int32_t> ids = tokenizer_->encode_context(prompt, ctx);

    const auto tok_emb = mat_view(params_.at("token_embedding.weight"), config_.vocab_size, tw);
    const auto pos = mat_view(params_.at("positional_embedding"), ctx, tw);

    Eigen::MatrixXf x(ctx, tw);
    int eot_pos = ctx - 1;
    for (int t = 0; t < ctx; ++t) {
        const std::int32_t id = ids[static_cast<std::size_t>(t)];
        if (id < 0 || id >= config_.vocab_size) {
            throw DataError("token id out of range for the loaded vocabulary");
        }
        x.row(t) = tok_emb.row(id) + pos.row(t);
        if (id == tokenizer_->eot_id()) {
            eot_pos = t;
            break;
        }
    }
    // Tokens after the end marker are zero-padding; causal attention means
    // they cannot influence the end position, so compute only rows <= eot.
    Eigen::MatrixXf active = x.topRows(eot_pos + 1);
    for (int b = 0; b < config_.text_layers; ++b) {
        active = block_forward(params_, block_prefix("", b), tw, config_.text_heads, true, active,
                               nullptr);
    }

    const auto g_final = vec_view(params_.at("ln_final.weight"));
    const auto b_final = vec_view(params_.at("ln_final.bias"));
    Eigen::MatrixXf eot_row = active.row(eot_pos);
    Eigen::MatrixXf hat;
    Eigen::VectorXf inv;
    Eigen::MatrixXf normed = ops::layer_norm(eot_row, g_final, b_final, hat, inv);
    const auto tproj = mat_view(params_.at("text_projection"), tw, config_.embed_dim);
    return (normed.row(0) * tproj).transpose();
}

float VitBackend::logit_scale() const {
    return std::exp(params_.at("logit_scale").values.at(0));
}

nlohmann::json VitBackend::config_json() const {
    return {{"image_size", config_.image_size},
            {"patch_size", config_.patch_size},
            {"width", config_.width},
            {"layers", config_.layers},
            {"heads", config_.heads},
            {"embed_dim", config_.embed_dim},
            {"mlp_ratio", config_.mlp_ratio},
            {"with_text", config_.with_text},
            {"vocab_size", config_.vocab_size},
            {"context_length", config_.context_length},
            {"text_width", config_.text_width},
            {"text_heads", config_.text_heads},
            {"text_layers", config_.text_layers},
            {"tokenizer_path", config_.tokenizer_path},
            {"seed", config_.seed}};
}

VitConfig VitBackend::config_from_json(const nlohmann::json& j) {
    VitConfig config;
    config.image_size = j.value("image_size", config.image_size);
    config.patch_size = j.value("patch_size", config.patch_size);
    config.width = j.value("width", config.width);
    config.layers = j.value("layers", config.layers);
    config.heads = j.value("heads", config.heads);
    config.embed_dim = j.value("embed_dim", config.embed_dim);
    config.mlp_ratio = j.value("mlp_ratio", config.mlp_ratio);
    config.with_text = j.value("with_text", config.with_text);
    config.vocab_size = j.value("vocab_size", config.vocab_size);
    config.context_length = j.value("context_length", config.context_length);
    config.text_width = j.value("text_width", config.text_width);
    config.text_heads = j.value("text_heads", config.text_heads);
    config.text_layers = j.value("text_layers", config.text_layers);
    config.tokenizer_path = j.value("tokenizer_path", config.tokenizer_path);
    config.seed = j.value("seed", config.seed);
    return config;
}

std::unique_ptr<EncoderBackend> VitBackend::clone() const {
    auto copy = std::unique_ptr<VitBackend>(new VitBackend(config_, params_));
    return copy;
}

} // namespace cxrkit::model
