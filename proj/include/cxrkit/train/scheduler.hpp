#pragma once

namespace cxrkit::train {

// Plateau policy in maximize mode: after `patience` consecutive epochs
// without improvement the caller is told to scale learning rates by
// `factor`, floored at `min_lr`. The counter resets after each reduction,
// so every halving is preceded by exactly `patience` stagnant epochs.
class PlateauScheduler {
public:
    struct Config {
        double factor = 0.5;
        int patience = 2;
        double min_lr = 1e-7;
    };

    PlateauScheduler() : PlateauScheduler(Config{}) {}
    explicit PlateauScheduler(Config config);

    // Feed one epoch's validation metric; true means "reduce now".
    bool observe(double metric);

    // New learning rate after a reduction event.
    double reduced(double lr) const;

    const Config& config() const { return config_; }
    int stagnant_epochs() const { return stagnant_; }
    double best() const { return best_; }

private:
    Config config_;
    double best_;
    int stagnant_ = 0;
    bool seen_any_ = false;
};

} // namespace cxrkit::train
