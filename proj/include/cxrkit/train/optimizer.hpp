#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cxrkit/model/params.hpp"

namespace cxrkit::train {

// Adam with decoupled weight decay over named parameter groups. Groups
// keep independent learning rates (encoder vs head) but share one global
// step counter.
class AdamW {
public:
    struct Group {
        std::string name;
        model::ParamStore* params = nullptr;
        std::vector<std::string> trainable;  // tensor names within `params`
        double lr = 1e-4;
        double weight_decay = 1e-2;
    };

    explicit AdamW(std::vector<Group> groups, double beta1 = 0.9, double beta2 = 0.999,
                   double eps = 1e-8);

    // grads[i] holds gradients for groups[i]; names absent from the map
    // are treated as zero-gradient (state still advances, decay applies).
    void step(const std::vector<const model::GradMap*>& grads);

    std::size_t group_count() const { return groups_.size(); }
    const std::string& group_name(std::size_t g) const { return groups_[g].name; }
    double lr(std::size_t g) const { return groups_[g].lr; }
    void set_lr(std::size_t g, double lr) { groups_[g].lr = lr; }
    std::int64_t step_count() const { return t_; }

private:
    struct Moments {
        std::vector<float> m, v;
    };

    std::vector<Group> groups_;
    std::vector<std::vector<Moments>> state_;  // [group][param]
    double beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
};

// Scales every gradient so the global L2 norm across all maps does not
// exceed max_norm; returns the factor applied (1.0 when under threshold).
double clip_gradients(const std::vector<model::GradMap*>& grads, double max_norm);

} // namespace cxrkit::train
