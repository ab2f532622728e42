#include "cxrkit/model/params.hpp"

#include <stdexcept>

#include "cxrkit/common.hpp"

namespace cxrkit::model {

Tensor Tensor::zeros(std::vector<std::int64_t> shape) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
        n *= d;
    }
    Tensor t;
    t.shape = std::move(shape);
    t.values.assign(static_cast<std::size_t>(n), 0.0f);
    return t;
}

Tensor& ParamStore::add(const std::string& name, Tensor tensor) {
    auto [it, inserted] = tensors_.emplace(name, std::move(tensor));
    if (!inserted) {
        throw std::invalid_argument("duplicate parameter name: " + name);
    }
    order_.push_back(name);
    return it->second;
}

bool ParamStore::has(std::string_view name) const {
    return tensors_.find(std::string(name)) != tensors_.end();
}

Tensor& ParamStore::at(const std::string& name) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw std::invalid_argument("unknown parameter: " + name);
    return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw std::invalid_argument("unknown parameter: " + name);
    return it->second;
}

std::int64_t ParamStore::total_params() const {
    std::int64_t n = 0;
    for (const auto& name : order_) n += tensors_.at(name).size();
    return n;
}

std::int64_t ParamStore::params_of(std::span<const std::string> names) const {
    std::int64_t n = 0;
    for (const auto& name : names) n += at(name).size();
    return n;
}

std::uint64_t ParamStore::content_hash() const {
    return content_hash(order_);
}

std::uint64_t ParamStore::content_hash(std::span<const std::string> names) const {
    std::uint64_t h = kFnvOffset;
    for (const auto& name : names) {
        const Tensor& t = at(name);
        h = fnv1a64(name, h);
        h = fnv1a64(t.shape.data(), t.shape.size() * sizeof(std::int64_t), h);
        h = fnv1a64(t.values.data(), t.values.size() * sizeof(float), h);
    }
    return h;
}

std::vector<float>& GradMap::accumulate(const std::string& name, std::size_t size) {
    auto it = grads_.find(name);
    if (it == grads_.end()) {
        it = grads_.emplace(name, std::vector<float>(size, 0.0f)).first;
        order_.push_back(name);
    } else if (it->second.size() != size) {
        throw std::invalid_argument("gradient size mismatch for " + name);
    }
    return it->second;
}

bool GradMap::has(std::string_view name) const {
    return grads_.find(std::string(name)) != grads_.end();
}

std::vector<float>& GradMap::at(const std::string& name) {
    auto it = grads_.find(name);
    if (it == grads_.end()) throw std::invalid_argument("unknown gradient: " + name);
    return it->second;
}

const std::vector<float>& GradMap::at(const std::string& name) const {
    auto it = grads_.find(name);
    if (it == grads_.end()) throw std::invalid_argument("unknown gradient: " + name);
    return it->second;
}

void GradMap::clear() {
    order_.clear();
    grads_.clear();
}

} // namespace cxrkit::model
