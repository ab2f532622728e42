#include "cxrkit/data/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "cxrkit/common.hpp"

namespace cxrkit::data {

namespace {

float bilinear_sample(const Image& img, int c, float y, float x) {
    if (y < -0.5f || x < -0.5f || y > static_cast<float>(img.height) - 0.5f ||
        x > static_cast<float>(img.width) - 0.5f) {
        return 0.0f; // outside: zero fill
    }
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const float ty = y - static_cast<float>(y0);
    const float tx = x - static_cast<float>(x0);
    auto px = [&](int yy, int xx) {
        if (yy < 0 || xx < 0 || yy >= img.height || xx >= img.width) return 0.0f;
        return img.at(c, yy, xx);
    };
    const float top = px(y0, x0) * (1.0f - tx) + px(y0, x0 + 1) * tx;
    const float bot = px(y0 + 1, x0) * (1.0f - tx) + px(y0 + 1, x0 + 1) * tx;
    return top * (1.0f - ty) + bot * ty;
}

Image affine_warp(const Image& src, float angle_deg, float tx, float ty, float scale) {
    Image dst = Image::zeros(src.channels, src.height, src.width);
    const float rad = angle_deg * std::numbers::pi_v<float> / 180.0f;
    const float cos_r = std::cos(rad);
    const float sin_r = std::sin(rad);
    const float cy = (static_cast<float>(src.height) - 1.0f) / 2.0f;
    const float cx = (static_cast<float>(src.width) - 1.0f) / 2.0f;
    const float inv_s = 1.0f / scale;
    for (int y = 0; y < dst.height; ++y) {
        for (int x = 0; x < dst.width; ++x) {
            // Inverse map of: p' = R*s*(p - c) + c + t
            const float dy = static_cast<float>(y) - cy - ty;
            const float dx = static_cast<float>(x) - cx - tx;
            const float sy = (cos_r * dy - sin_r * dx) * inv_s + cy;
            const float sx = (sin_r * dy + cos_r * dx) * inv_s + cx;
            for (int c = 0; c < src.channels; ++c) {
                dst.at(c, y, x) = bilinear_sample(src, c, sy, sx);
            }
        }
    }
    return dst;
}

void clamp01(Image& img) {
    for (float& v : img.data) v = std::clamp(v, 0.0f, 1.0f);
}

// Mean over a luminance version of the image (equal channel weights for
// radiographs; channels are replicas or near-replicas here).
float gray_mean(const Image& img) {
    double sum = 0.0;
    for (float v : img.data) sum += v;
    return img.data.empty() ? 0.0f : static_cast<float>(sum / static_cast<double>(img.data.size()));
}

} // namespace

Image hflip(const Image& src) {
    Image dst = src;
    for (int c = 0; c < src.channels; ++c) {
        for (int y = 0; y < src.height; ++y) {
            for (int x = 0; x < src.width; ++x) {
                dst.at(c, y, x) = src.at(c, y, src.width - 1 - x);
            }
        }
    }
    return dst;
}

Image augment(const Image& src, const AugmentationSpec& spec, Rng& rng) {
    if (!spec.enabled) {
        return src;
    }
    if (spec.hflip_prob < 0.0f || spec.hflip_prob > 1.0f || spec.rotation_deg < 0.0f ||
        spec.translate_frac < 0.0f || spec.scale_min <= 0.0f || spec.scale_max < spec.scale_min ||
        spec.brightness < 0.0f || spec.contrast < 0.0f || spec.saturation < 0.0f) {
        throw std::invalid_argument("augment: spec parameters out of range");
    }

    // All draws happen unconditionally so the stream layout is fixed.
    const bool flip = rng.bernoulli(spec.hflip_prob);
    const float angle = static_cast<float>(rng.uniform(-spec.rotation_deg, spec.rotation_deg));
    const float tx = static_cast<float>(rng.uniform(-spec.translate_frac, spec.translate_frac)) *
                     static_cast<float>(src.width);
    const float ty = static_cast<float>(rng.uniform(-spec.translate_frac, spec.translate_frac)) *
                     static_cast<float>(src.height);
    const float scale = static_cast<float>(rng.uniform(spec.scale_min, spec.scale_max));
    const float fb = static_cast<float>(rng.uniform(std::max(0.0f, 1.0f - spec.brightness),
                                                    1.0f + spec.brightness));
    const float fc = static_cast<float>(rng.uniform(std::max(0.0f, 1.0f - spec.contrast),
                                                    1.0f + spec.contrast));
    const float fs = static_cast<float>(rng.uniform(std::max(0.0f, 1.0f - spec.saturation),
                                                    1.0f + spec.saturation));

    Image out = flip ? hflip(src) : src;
    if (angle != 0.0f || tx != 0.0f || ty != 0.0f || scale != 1.0f) {
        out = affine_warp(out, angle, tx, ty, scale);
    }
    if (fb != 1.0f) {
        for (float& v : out.data) v *= fb;
        clamp01(out);
    }
    if (fc != 1.0f) {
        const float m = gray_mean(out);
        for (float& v : out.data) v = fc * v + (1.0f - fc) * m;
        clamp01(out);
    }
    if (fs != 1.0f && out.channels == 3) {
        const std::size_t plane = out.plane();
        for (std::size_t i = 0; i < plane; ++i) {
            const float g =
                (out.data[i] + out.data[plane + i] + out.data[2 * plane + i]) / 3.0f;
            for (int c = 0; c < 3; ++c) {
                float& v = out.data[static_cast<std::size_t>(c) * plane + i];
                v = std::clamp(fs * v + (1.0f - fs) * g, 0.0f, 1.0f);
            }
        }
    }
    return out;
}

std::uint64_t augment_seed(std::uint64_t global_seed, int epoch, std::string_view image_id) {
    return fnv1a64(image_id,
                   derive_seed(global_seed, "augment", static_cast<std::uint64_t>(epoch)));
}

} // namespace cxrkit::data
