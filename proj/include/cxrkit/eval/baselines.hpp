#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "cxrkit/data/labels.hpp"
#include "cxrkit/eval/report.hpp"

namespace cxrkit::eval {

// Published per-class AUC columns transcribed into data/reference_results.json,
// kept in file order. Values are aligned to the canonical class index order.
struct BaselineTable {
    std::vector<std::string> model_names;
    std::vector<std::array<double, data::kNumClasses>> columns;
};

// Reads the transcribed reference file. Every model must provide a value for
// all 14 classes; anything missing or misnamed throws DataError.
BaselineTable load_baseline_table(const std::string& path);

struct ComparisonRow {
    std::string label;  // class name, or "Average" for the bottom row
    std::vector<std::optional<double>> values;
    std::vector<int> best_columns;  // argmax column indices; >1 entry means a tie
};

struct ComparisonTable {
    std::vector<std::string> column_names;  // baselines first, report column last
    std::vector<ComparisonRow> rows;        // 14 class rows plus the average row
};

// Side-by-side per-class table of the baselines and one evaluated report.
// Undefined report classes render as gaps and never win a row. The average
// row holds each baseline's column mean and the report's mean_auc.
ComparisonTable compare_with_baselines(const EvalReport& report,
                                       const std::string& report_label,
                                       const BaselineTable& baselines);

std::string comparison_to_csv(const ComparisonTable& table);

// Fixed-width rendering; the best value in each row is starred, ties are
// marked '=' on every tied column.
std::string comparison_to_text(const ComparisonTable& table);

} // namespace cxrkit::eval
