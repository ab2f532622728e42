#pragma once

#include <array>

#include "cxrkit/data/image.hpp"

namespace cxrkit::data {

// Normalization constants match the pretrained encoder's published
// preprocessing pipeline.
struct PreprocessSpec {
    int target_size = 224;
    std::array<float, 3> mean{0.48145466f, 0.4578275f, 0.40821073f};
    std::array<float, 3> stddev{0.26862954f, 0.26130258f, 0.27577711f};
};

// Catmull-Rom bicubic, weights renormalized so constants are preserved
// exactly; edge pixels clamp.
Image resize_bicubic(const Image& src, int out_h, int out_w);

// Short-side resize + center crop to target_size, grayscale replicated to
// 3 channels, then per-channel normalization. Output is 3 x S x S.
Image preprocess(const Image& src, const PreprocessSpec& spec);

} // namespace cxrkit::data
