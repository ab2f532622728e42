#include "cxrkit/data/image.hpp"

#include "cxrkit/common.hpp"
#include "cxrkit/data/png_io.hpp"

namespace cxrkit::data {

DirectoryImageProvider::DirectoryImageProvider(std::filesystem::path root, std::size_t cache_limit)
    : root_(std::move(root)), cache_limit_(cache_limit) {}

Image DirectoryImageProvider::load(const std::string& image_id) const {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = cache_.find(image_id);
        if (it != cache_.end()) return it->second;
    }
    Image img = read_png(root_ / "images" / image_id);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        if (cache_.size() < cache_limit_) cache_.emplace(image_id, img);
    }
    return img;
}

Image MemoryImageProvider::load(const std::string& image_id) const {
    auto it = images_.find(image_id);
    if (it == images_.end()) {
        throw DataError("image id not found: " + image_id);
    }
    return it->second;
}

} // namespace cxrkit::data
