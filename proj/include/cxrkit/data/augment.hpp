#pragma once

#include <cstdint>
#include <string_view>

#include "cxrkit/data/image.hpp"
#include "cxrkit/rng.hpp"

namespace cxrkit::data {

struct AugmentationSpec {
    bool enabled = true;
    float hflip_prob = 0.5f;
    float rotation_deg = 10.0f;   // +- range
    float translate_frac = 0.1f;  // +- fraction of each dimension
    float scale_min = 0.9f;
    float scale_max = 1.1f;
    float brightness = 0.2f;  // factor in [1-b, 1+b]
    float contrast = 0.2f;
    float saturation = 0.1f;
};

Image hflip(const Image& src);

// Stochastic flip / affine / color jitter; deterministic given the rng
// state. Draw order is fixed: flip, angle, translation, scale,
// brightness, contrast, saturation. Jitter factors apply in that same
// fixed order. Identity parameters short-circuit so a disabled or
// all-identity spec returns the input bit-exactly.
Image augment(const Image& src, const AugmentationSpec& spec, Rng& rng);

// Per-sample stream: parallel loading order cannot change results.
std::uint64_t augment_seed(std::uint64_t global_seed, int epoch, std::string_view image_id);

} // namespace cxrkit::data
