#include "cxrkit/eval/baselines.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "cxrkit/common.hpp"

namespace cxrkit::eval {

namespace {

std::string format_auc(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", value);
    return buf;
}

} // namespace

BaselineTable load_baseline_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError(path + ": cannot open baseline file");
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
    if (!j.contains("classes") || !j.contains("models")) {
        throw DataError(path + ": baseline file needs 'classes' and 'models'");
    }

    // The file may list classes in any order; map each position to the
    // canonical index and require full coverage.
    const auto& classes = j.at("classes");
    if (!classes.is_array() || classes.size() != data::kNumClasses) {
        throw DataError(path + ": 'classes' must list all 14 findings");
    }
    std::array<int, data::kNumClasses> canonical_of{};
    std::set<int> seen;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        const auto name = classes.at(i).get<std::string>();
        const auto index = data::disease_index(name);
        if (!index.has_value()) {
            throw DataError(path + ": unknown class '" + name + "'");
        }
        if (!seen.insert(*index).second) {
            throw DataError(path + ": duplicate class '" + name + "'");
        }
        canonical_of[i] = *index;
    }

    BaselineTable table;
    for (const auto& model : j.at("models")) {
        if (!model.contains("name") || !model.contains("per_class_auc")) {
            throw DataError(path + ": every model needs 'name' and 'per_class_auc'");
        }
        const auto name = model.at("name").get<std::string>();
        const auto& values = model.at("per_class_auc");
        if (!values.is_array() || values.size() != data::kNumClasses) {
            throw DataError(path + ": model '" + name + "' must give one AUC per class");
        }
        std::array<double, data::kNumClasses> column{};
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!values.at(i).is_number()) {
                throw DataError(path + ": model '" + name + "' has a non-numeric AUC");
            }
            column[static_cast<std::size_t>(canonical_of[i])] = values.at(i).get<double>();
        }
        table.model_names.push_back(name);
        table.columns.push_back(column);
    }
    if (table.model_names.empty()) {
        throw DataError(path + ": baseline file lists no models");
    }
    return table;
}

ComparisonTable compare_with_baselines(const EvalReport& report,
                                       const std::string& report_label,
                                       const BaselineTable& baselines) {
    if (baselines.model_names.size() != baselines.columns.size()) {
        throw std::invalid_argument("baseline table is internally inconsistent");
    }
    ComparisonTable table;
    table.column_names = baselines.model_names;
    table.column_names.push_back(report_label);

    const auto finish_row = [](ComparisonRow& row) {
        double best = 0.0;
        bool any = false;
        for (std::size_t c = 0; c < row.values.size(); ++c) {
            if (!row.values[c].has_value()) continue;
            if (!any || *row.values[c] > best) {
                best = *row.values[c];
                any = true;
            }
        }
        if (!any) return;
        for (std::size_t c = 0; c < row.values.size(); ++c) {
            if (row.values[c].has_value() && *row.values[c] == best) {
                row.best_columns.push_back(static_cast<int>(c));
            }
        }
    };

    for (int c = 0; c < data::kNumClasses; ++c) {
        ComparisonRow row;
        row.label = data::disease_names()[static_cast<std::size_t>(c)];
        for (const auto& column : baselines.columns) {
            row.values.emplace_back(column[static_cast<std::size_t>(c)]);
        }
        row.values.push_back(report.per_class_auc[static_cast<std::size_t>(c)]);
        finish_row(row);
        table.rows.push_back(std::move(row));
    }

    ComparisonRow average;
    average.label = "Average";
    for (const auto& column : baselines.columns) {
        double sum = 0.0;
        for (double v : column) sum += v;
        average.values.emplace_back(sum / data::kNumClasses);
    }
    average.values.emplace_back(report.mean_auc);
    finish_row(average);
    table.rows.push_back(std::move(average));
    return table;
}

std::string comparison_to_csv(const ComparisonTable& table) {
    std::string csv = "pathology";
    for (const auto& name : table.column_names) {
        csv += ',';
        csv += name;
    }
    csv += ",best\n";
    for (const ComparisonRow& row : table.rows) {
        csv += row.label;
        for (const auto& value : row.values) {
            csv += ',';
            if (value.has_value()) csv += format_auc(*value);
        }
        csv += ',';
        if (row.best_columns.size() == 1) {
            csv += table.column_names[static_cast<std::size_t>(row.best_columns.front())];
        } else if (row.best_columns.size() > 1) {
            csv += "tie";
        }
        csv += '\n';
    }
    return csv;
}

std::string comparison_to_text(const ComparisonTable& table) {
    std::size_t label_width = std::string("Pathology").size();
    for (const ComparisonRow& row : table.rows) {
        label_width = std::max(label_width, row.label.size());
    }
    std::vector<std::size_t> widths;
    for (const auto& name : table.column_names) {
        widths.push_back(std::max<std::size_t>(name.size(), 6));
    }

    const auto pad_left = [](const std::string& s, std::size_t w) {
        return std::string(w > s.size() ? w - s.size() : 0, ' ') + s;
    };
    const auto pad_right = [](const std::string& s, std::size_t w) {
        return s + std::string(w > s.size() ? w - s.size() : 0, ' ');
    };

    std::string text = pad_right("Pathology", label_width);
    for (std::size_t c = 0; c < table.column_names.size(); ++c) {
        text += "  " + pad_left(table.column_names[c], widths[c]);
    }
    text += '\n';
    text += std::string(text.size() - 1, '-');
    text += '\n';

    for (const ComparisonRow& row : table.rows) {
        text += pad_right(row.label, label_width);
        const bool tie = row.best_columns.size() > 1;
        for (std::size_t c = 0; c < row.values.size(); ++c) {
            std::string cell = row.values[c].has_value() ? format_auc(*row.values[c]) : "-";
            const bool is_best =
                std::find(row.best_columns.begin(), row.best_columns.end(), static_cast<int>(c)) !=
                row.best_columns.end();
            if (is_best) cell = (tie ? "=" : "*") + cell;
            text += "  " + pad_left(cell, widths[c]);
        }
        text += '\n';
    }
    text += "\n* best in row, = tied best\n";
    return text;
}

} // namespace cxrkit::eval
