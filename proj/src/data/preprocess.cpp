#include "cxrkit/data/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cxrkit::data {

namespace {

// Catmull-Rom kernel (a = -0.5).
float cubic_weight(float t) {
    constexpr float a = -0.5f;
    t = std::fabs(t);
    if (t <= 1.0f) return ((a + 2.0f) * t - (a + 3.0f)) * t * t + 1.0f;
    if (t < 2.0f) return (((t - 5.0f) * t + 8.0f) * t - 4.0f) * a;
    return 0.0f;
}

} // namespace

Image resize_bicubic(const Image& src, int out_h, int out_w) {
    if (src.height <= 0 || src.width <= 0 || src.channels <= 0) {
        throw std::invalid_argument("resize_bicubic: empty image");
    }
    if (out_h == src.height && out_w == src.width) {
        return src;
    }
    Image dst = Image::zeros(src.channels, out_h, out_w);
    const float sy = static_cast<float>(src.height) / static_cast<float>(out_h);
    const float sx = static_cast<float>(src.width) / static_cast<float>(out_w);
    std::vector<float> wx(4), wy(4);
    for (int oy = 0; oy < out_h; ++oy) {
        const float fy = (static_cast<float>(oy) + 0.5f) * sy - 0.5f;
        const int iy = static_cast<int>(std::floor(fy));
        const float ty = fy - static_cast<float>(iy);
        float wy_sum = 0.0f;
        for (int k = 0; k < 4; ++k) {
            wy[k] = cubic_weight(static_cast<float>(k - 1) - ty);
            wy_sum += wy[k];
        }
        for (int ox = 0; ox < out_w; ++ox) {
            const float fx = (static_cast<float>(ox) + 0.5f) * sx - 0.5f;
            const int ix = static_cast<int>(std::floor(fx));
            const float tx = fx - static_cast<float>(ix);
            float wx_sum = 0.0f;
            for (int k = 0; k < 4; ++k) {
                wx[k] = cubic_weight(static_cast<float>(k - 1) - tx);
                wx_sum += wx[k];
            }
            const float norm = wx_sum * wy_sum;
            for (int c = 0; c < src.channels; ++c) {
                float acc = 0.0f;
                for (int ky = 0; ky < 4; ++ky) {
                    const int y = std::clamp(iy + ky - 1, 0, src.height - 1);
                    float row = 0.0f;
                    for (int kx = 0; kx < 4; ++kx) {
                        const int x = std::clamp(ix + kx - 1, 0, src.width - 1);
                        row += wx[kx] * src.at(c, y, x);
                    }
                    acc += wy[ky] * row;
                }
                dst.at(c, oy, ox) = acc / norm;
            }
        }
    }
    return dst;
}

Image preprocess(const Image& src, const PreprocessSpec& spec) {
    if (src.height <= 0 || src.width <= 0 || src.channels <= 0 || src.data.empty()) {
        throw std::invalid_argument("preprocess: empty image");
    }
    if (src.channels != 1 && src.channels != 3) {
        throw std::invalid_argument("preprocess: expected 1 or 3 channels, got " +
                                    std::to_string(src.channels));
    }
    const int s = spec.target_size;
    if (s <= 0) {
        throw std::invalid_argument("preprocess: nonpositive target size");
    }

    // Scale so the short side hits target_size, then center crop.
    const int short_side = std::min(src.height, src.width);
    const int rh = static_cast<int>(std::lround(static_cast<double>(src.height) * s / short_side));
    const int rw = static_cast<int>(std::lround(static_cast<double>(src.width) * s / short_side));
    Image resized = resize_bicubic(src, std::max(rh, s), std::max(rw, s));
    const int y0 = (resized.height - s) / 2;
    const int x0 = (resized.width - s) / 2;

    Image out = Image::zeros(3, s, s);
    for (int c = 0; c < 3; ++c) {
        const int sc = src.channels == 1 ? 0 : c;
        const float mean = spec.mean[static_cast<std::size_t>(c)];
        const float inv_std = 1.0f / spec.stddev[static_cast<std::size_t>(c)];
        for (int y = 0; y < s; ++y) {
            for (int x = 0; x < s; ++x) {
                out.at(c, y, x) = (resized.at(sc, y0 + y, x0 + x) - mean) * inv_std;
            }
        }
    }
    return out;
}

} // namespace cxrkit::data
