#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cxrkit/model/params.hpp"

namespace cxrkit::model {

// Tensor container in the safetensors layout: an 8-byte little-endian
// header length, a JSON header mapping tensor names to dtype/shape/offsets
// (plus an optional string-valued "__metadata__" object), then raw data.
struct TensorFile {
    std::map<std::string, std::string> metadata;
    std::map<std::string, Tensor> tensors;

    const Tensor& at(const std::string& name) const;
    bool has(const std::string& name) const { return tensors.count(name) != 0; }
};

// Reads F32 directly; F16, BF16 and F64 payloads are widened/narrowed to
// F32. Throws DataError on malformed files or unsupported dtypes.
TensorFile read_tensor_file(const std::filesystem::path& path);

// Writes all tensors as F32, contiguous in sorted-name order.
void write_tensor_file(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, const Tensor*>>& tensors,
                       const std::map<std::string, std::string>& metadata);

} // namespace cxrkit::model
