#pragma once

#include <concepts>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cxrkit::model {

struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<float> values;

    static Tensor zeros(std::vector<std::int64_t> shape);
    template <std::integral... Dims>
        requires(sizeof...(Dims) > 0)
    static Tensor zeros(Dims... dims) {
        return zeros(std::vector<std::int64_t>{static_cast<std::int64_t>(dims)...});
    }
    std::int64_t size() const { return static_cast<std::int64_t>(values.size()); }
};

// Named parameter tensors in insertion order. Order is part of the
// contract: checkpoints, hashing and optimizer walks all follow it.
class ParamStore {
public:
    Tensor& add(const std::string& name, Tensor tensor);
    bool has(std::string_view name) const;
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    const std::vector<std::string>& names() const { return order_; }

    std::int64_t total_params() const;
    std::int64_t params_of(std::span<const std::string> names) const;

    // FNV over names, shapes, and raw float bytes.
    std::uint64_t content_hash() const;
    std::uint64_t content_hash(std::span<const std::string> names) const;

private:
    std::vector<std::string> order_;
    std::unordered_map<std::string, Tensor> tensors_;
};

// Gradient buffers keyed by parameter name.
class GradMap {
public:
    std::vector<float>& accumulate(const std::string& name, std::size_t size);
    bool has(std::string_view name) const;
    std::vector<float>& at(const std::string& name);
    const std::vector<float>& at(const std::string& name) const;
    const std::vector<std::string>& names() const { return order_; }
    void clear();

private:
    std::vector<std::string> order_;
    std::unordered_map<std::string, std::vector<float>> grads_;
};

} // namespace cxrkit::model
