#pragma once

#include <filesystem>

#include "cxrkit/data/image.hpp"

namespace cxrkit::data {

// Reads 8/16-bit grayscale or RGB(A) PNGs; alpha is dropped, palette
// expanded, values scaled to [0, 1].
Image read_png(const std::filesystem::path& path);

// Writes 8-bit grayscale (1 channel) or RGB (3 channels); values are
// clamped to [0, 1].
void write_png(const std::filesystem::path& path, const Image& image);

} // namespace cxrkit::data
