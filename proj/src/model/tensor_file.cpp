#include "cxrkit/model/tensor_file.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "cxrkit/common.hpp"

namespace cxrkit::model {

namespace {

constexpr std::uint64_t kMaxHeaderBytes = 100ull * 1024 * 1024;

float half_to_float(std::uint16_t h) {
    const std::uint32_t sign = static_cast<std::uint32_t>(h >> 15) & 1u;
    const std::uint32_t exp = static_cast<std::uint32_t>(h >> 10) & 0x1fu;
    std::uint32_t mant = h & 0x3ffu;
    std::uint32_t bits;
    if (exp == 0) {
        if (mant == 0) {
            bits = sign << 31;
        } else {
            // Subnormal half: renormalize into a regular float.
            int e = -1;
            do {
                mant <<= 1;
                ++e;
            } while ((mant & 0x400u) == 0);
            bits = (sign << 31) | static_cast<std::uint32_t>(127 - 15 - e) << 23 |
                   ((mant & 0x3ffu) << 13);
        }
    } else if (exp == 0x1f) {
        bits = (sign << 31) | 0x7f800000u | (mant << 13);
    } else {
        bits = (sign << 31) | ((exp - 15 + 127) << 23) | (mant << 13);
    }
    float out;
    std::memcpy(&out, &bits, sizeof(out));
    return out;
}

float bfloat_to_float(std::uint16_t b) {
    const std::uint32_t bits = static_cast<std::uint32_t>(b) << 16;
    float out;
    std::memcpy(&out, &bits, sizeof(out));
    return out;
}

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
    throw DataError(path.string() + ": " + what);
}

} // namespace

const Tensor& TensorFile::at(const std::string& name) const {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw DataError("tensor file has no tensor named \"" + name + "\"");
    return it->second;
}

TensorFile read_tensor_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open tensor file");

    std::uint8_t len_bytes[8];
    if (!in.read(reinterpret_cast<char*>(len_bytes), 8)) fail(path, "truncated header length");
    std::uint64_t header_len = 0;
    for (int i = 7; i >= 0; --i) header_len = (header_len << 8) | len_bytes[i];
    if (header_len == 0 || header_len > kMaxHeaderBytes) fail(path, "implausible header length");

    std::string header_text(header_len, '\0');
    if (!in.read(header_text.data(), static_cast<std::streamsize>(header_len))) {
        fail(path, "truncated header");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_text);
    } catch (const nlohmann::json::exception& e) {
        fail(path, std::string("header is not valid JSON: ") + e.what());
    }
    if (!header.is_object()) fail(path, "header is not a JSON object");

    const std::uint64_t data_start = 8 + header_len;
    in.seekg(0, std::ios::end);
    const std::uint64_t file_size = static_cast<std::uint64_t>(in.tellg());

    TensorFile out;
    for (const auto& [name, entry] : header.items()) {
        if (name == "__metadata__") {
            for (const auto& [k, v] : entry.items()) {
                if (!v.is_string()) fail(path, "__metadata__ values must be strings");
                out.metadata[k] = v.get<std::string>();
            }
            continue;
        }
        if (!entry.is_object()) fail(path, "tensor entry \"" + name + "\" is not an object");
        const std::string dtype = entry.value("dtype", "");
        const auto shape = entry.value("shape", std::vector<std::int64_t>{});
        const auto offsets = entry.value("data_offsets", std::vector<std::uint64_t>{});
        if (offsets.size() != 2 || offsets[1] < offsets[0]) {
            fail(path, "tensor \"" + name + "\" has malformed data_offsets");
        }
        std::int64_t count = 1;
        for (const auto d : shape) {
            if (d < 0) fail(path, "tensor \"" + name + "\" has a negative dimension");
            count *= d;
        }
        const std::uint64_t byte_len = offsets[1] - offsets[0];
        std::size_t elem_size = 0;
        if (dtype == "F32") {
            elem_size = 4;
        } else if (dtype == "F16" || dtype == "BF16") {
            elem_size = 2;
        } else if (dtype == "F64") {
            elem_size = 8;
        } else {
            fail(path, "tensor \"" + name + "\" has unsupported dtype \"" + dtype + "\"");
        }
        if (byte_len != static_cast<std::uint64_t>(count) * elem_size) {
            fail(path, "tensor \"" + name + "\" byte length does not match its shape");
        }
        if (data_start + offsets[1] > file_size) {
            fail(path, "tensor \"" + name + "\" extends past end of file");
        }

        Tensor tensor;
        tensor.shape = shape;
        tensor.values.resize(static_cast<std::size_t>(count));
        in.seekg(static_cast<std::streamoff>(data_start + offsets[0]));
        if (dtype == "F32") {
            if (!in.read(reinterpret_cast<char*>(tensor.values.data()),
                         static_cast<std::streamsize>(byte_len))) {
                fail(path, "tensor \"" + name + "\" payload read failed");
            }
        } else {
            std::vector<std::uint8_t> raw(byte_len);
            if (!in.read(reinterpret_cast<char*>(raw.data()),
                         static_cast<std::streamsize>(byte_len))) {
                fail(path, "tensor \"" + name + "\" payload read failed");
            }
            if (dtype == "F64") {
                for (std::int64_t i = 0; i < count; ++i) {
                    double v;
                    std::memcpy(&v, raw.data() + static_cast<std::size_t>(i) * 8, 8);
                    tensor.values[static_cast<std::size_t>(i)] = static_cast<float>(v);
                }
            } else {
                for (std::int64_t i = 0; i < count; ++i) {
                    std::uint16_t v;
                    std::memcpy(&v, raw.data() + static_cast<std::size_t>(i) * 2, 2);
                    tensor.values[static_cast<std::size_t>(i)] =
                        dtype == "F16" ? half_to_float(v) : bfloat_to_float(v);
                }
            }
        }
        if (!out.tensors.emplace(name, std::move(tensor)).second) {
            fail(path, "duplicate tensor \"" + name + "\"");
        }
    }
    return out;
}

void write_tensor_file(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, const Tensor*>>& tensors,
                       const std::map<std::string, std::string>& metadata) {
    std::vector<std::pair<std::string, const Tensor*>> ordered = tensors;
    std::sort(ordered.begin(), ordered.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < ordered.size(); ++i) {
        if (ordered[i].first == ordered[i - 1].first) {
            throw std::invalid_argument("write_tensor_file: duplicate tensor \"" +
                                        ordered[i].first + "\"");
        }
    }

    nlohmann::json header = nlohmann::json::object();
    if (!metadata.empty()) header["__metadata__"] = metadata;
    std::uint64_t offset = 0;
    for (const auto& [name, tensor] : ordered) {
        const std::uint64_t bytes = static_cast<std::uint64_t>(tensor->size()) * 4;
        header[name] = {{"dtype", "F32"},
                        {"shape", tensor->shape},
                        {"data_offsets", {offset, offset + bytes}}};
        offset += bytes;
    }
    std::string header_text = header.dump();
    while (header_text.size() % 8 != 0) header_text.push_back(' ');

    std::ofstream outf(path, std::ios::binary | std::ios::trunc);
    if (!outf) throw DataError(path.string() + ": cannot open for writing");
    const std::uint64_t header_len = header_text.size();
    std::uint8_t len_bytes[8];
    for (int i = 0; i < 8; ++i) len_bytes[i] = static_cast<std::uint8_t>(header_len >> (8 * i));
    outf.write(reinterpret_cast<const char*>(len_bytes), 8);
    outf.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const auto& [name, tensor] : ordered) {
        outf.write(reinterpret_cast<const char*>(tensor->values.data()),
                   static_cast<std::streamsize>(tensor->values.size() * sizeof(float)));
    }
    if (!outf) throw DataError(path.string() + ": write failed");
}

} // namespace cxrkit::model
