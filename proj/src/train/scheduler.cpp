#include "cxrkit/train/scheduler.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace cxrkit::train {

PlateauScheduler::PlateauScheduler(Config config)
    : config_(config), best_(-std::numeric_limits<double>::infinity()) {
    if (!(config_.factor > 0.0) || config_.factor >= 1.0) {
        throw std::invalid_argument("PlateauScheduler: factor must be in (0, 1)");
    }
    if (config_.patience < 1) {
        throw std::invalid_argument("PlateauScheduler: patience must be >= 1");
    }
    if (config_.min_lr < 0.0) {
        throw std::invalid_argument("PlateauScheduler: min_lr must be >= 0");
    }
}

bool PlateauScheduler::observe(double metric) {
    if (!seen_any_ || metric > best_) {
        best_ = metric;
        seen_any_ = true;
        stagnant_ = 0;
        return false;
    }
    ++stagnant_;
    if (stagnant_ >= config_.patience) {
        stagnant_ = 0;
        return true;
    }
    return false;
}

double PlateauScheduler::reduced(double lr) const {
    return std::max(lr * config_.factor, config_.min_lr);
}

} // namespace cxrkit::train
