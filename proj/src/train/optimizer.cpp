#include "cxrkit/train/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace cxrkit::train {

AdamW::AdamW(std::vector<Group> groups, double beta1, double beta2, double eps)
    : groups_(std::move(groups)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    state_.reserve(groups_.size());
    for (const auto& group : groups_) {
        if (group.params == nullptr) throw std::invalid_argument("AdamW: null parameter store");
        std::vector<Moments> moments;
        moments.reserve(group.trainable.size());
        for (const auto& name : group.trainable) {
            const auto size = static_cast<std::size_t>(group.params->at(name).size());
            moments.push_back({std::vector<float>(size, 0.0f), std::vector<float>(size, 0.0f)});
        }
        state_.push_back(std::move(moments));
    }
}

void AdamW::step(const std::vector<const model::GradMap*>& grads) {
    if (grads.size() != groups_.size()) {
        throw std::invalid_argument("AdamW: gradient map count does not match group count");
    }
    ++t_;
    const double bias1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bias2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));

    for (std::size_t g = 0; g < groups_.size(); ++g) {
        auto& group = groups_[g];
        for (std::size_t p = 0; p < group.trainable.size(); ++p) {
            const std::string& name = group.trainable[p];
            auto& values = group.params->at(name).values;
            auto& m = state_[g][p].m;
            auto& v = state_[g][p].v;
            const std::vector<float>* grad = nullptr;
            if (grads[g] != nullptr && grads[g]->has(name)) {
                grad = &grads[g]->at(name);
                if (grad->size() != values.size()) {
                    throw std::invalid_argument("AdamW: gradient size mismatch for " + name);
                }
            }
            for (std::size_t i = 0; i < values.size(); ++i) {
                const double gi = grad != nullptr ? static_cast<double>((*grad)[i]) : 0.0;
                const double mi = beta1_ * static_cast<double>(m[i]) + (1.0 - beta1_) * gi;
                const double vi = beta2_ * static_cast<double>(v[i]) + (1.0 - beta2_) * gi * gi;
                m[i] = static_cast<float>(mi);
                v[i] = static_cast<float>(vi);
                const double m_hat = mi / bias1;
                const double v_hat = vi / bias2;
                const double p_old = static_cast<double>(values[i]);
                values[i] = static_cast<float>(p_old - group.lr * m_hat /
                                                           (std::sqrt(v_hat) + eps_) -
                                               group.lr * group.weight_decay * p_old);
            }
        }
    }
}

double clip_gradients(const std::vector<model::GradMap*>& grads, double max_norm) {
    if (!(max_norm > 0.0)) throw std::invalid_argument("clip_gradients: max_norm must be > 0");
    double sum_sq = 0.0;
    for (const auto* map : grads) {
        if (map == nullptr) continue;
        for (const auto& name : map->names()) {
            for (float g : map->at(name)) sum_sq += static_cast<double>(g) * g;
        }
    }
    const double norm = std::sqrt(sum_sq);
    if (norm <= max_norm) return 1.0;
    const double factor = max_norm / norm;
    for (auto* map : grads) {
        if (map == nullptr) continue;
        for (const auto& name : map->names()) {
            for (float& g : map->at(name)) g = static_cast<float>(g * factor);
        }
    }
    return factor;
}

} // namespace cxrkit::train
