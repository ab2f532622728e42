#pragma once

#include <span>
#include <string>
#include <vector>

#include "cxrkit/eval/report.hpp"

namespace cxrkit::eval {

struct CurvePoint {
    int n_shots = 0;
    double mean_auc = 0.0;
};

// Collapses one report per shot count into (n_shots, mean_auc) rows sorted
// by ascending n_shots. Duplicate shot counts throw std::invalid_argument.
std::vector<CurvePoint> shots_curve(std::span<const EvalReport> reports);

// CSV with header "shots,mean_auc".
std::string curve_to_csv(std::span<const CurvePoint> curve);

// Self-contained line plot of mean AUC against shot count.
std::string curve_to_svg(std::span<const CurvePoint> curve);

} // namespace cxrkit::eval
