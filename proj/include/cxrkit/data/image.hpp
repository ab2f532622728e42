#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace cxrkit::data {

// Planar float image, CHW layout, values nominally in [0, 1] before
// normalization and unbounded after.
struct Image {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;

    static Image zeros(int c, int h, int w) {
        Image img;
        img.channels = c;
        img.height = h;
        img.width = w;
        img.data.assign(static_cast<std::size_t>(c) * h * w, 0.0f);
        return img;
    }

    std::size_t plane() const { return static_cast<std::size_t>(height) * width; }

    float& at(int c, int y, int x) {
        return data[static_cast<std::size_t>(c) * plane() + static_cast<std::size_t>(y) * width + x];
    }
    float at(int c, int y, int x) const {
        return data[static_cast<std::size_t>(c) * plane() + static_cast<std::size_t>(y) * width + x];
    }

    bool same_shape(const Image& other) const {
        return channels == other.channels && height == other.height && width == other.width;
    }
};

// Source of decoded images by id; implementations must be safe for
// concurrent use.
class ImageProvider {
public:
    virtual ~ImageProvider() = default;
    virtual Image load(const std::string& image_id) const = 0;
};

// Resolves <root>/images/<image_id> as a PNG file. Small datasets are
// cached in memory; caching stops past cache_limit images.
class DirectoryImageProvider : public ImageProvider {
public:
    explicit DirectoryImageProvider(std::filesystem::path root, std::size_t cache_limit = 4096);
    Image load(const std::string& image_id) const override;

private:
    std::filesystem::path root_;
    std::size_t cache_limit_;
    mutable std::mutex mutex_;
    mutable std::map<std::string, Image> cache_;
};

class MemoryImageProvider : public ImageProvider {
public:
    explicit MemoryImageProvider(std::map<std::string, Image> images) : images_(std::move(images)) {}
    Image load(const std::string& image_id) const override;

private:
    std::map<std::string, Image> images_;
};

} // namespace cxrkit::data
