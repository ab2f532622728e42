#include "cxrkit/data/labels.hpp"

#include <stdexcept>
#include <unordered_map>

#include "cxrkit/common.hpp"

namespace cxrkit::data {

const std::array<std::string, kNumClasses>& disease_names() {
    static const std::array<std::string, kNumClasses> names = {
        "Atelectasis",        "Consolidation", "Infiltration", "Pneumothorax",
        "Edema",              "Emphysema",     "Fibrosis",     "Effusion",
        "Pneumonia",          "Pleural_Thickening", "Cardiomegaly", "Nodule",
        "Mass",               "Hernia",
    };
    return names;
}

std::optional<int> disease_index(std::string_view name) {
    static const std::unordered_map<std::string_view, int> index = [] {
        std::unordered_map<std::string_view, int> m;
        const auto& names = disease_names();
        for (int i = 0; i < kNumClasses; ++i) m.emplace(names[i], i);
        return m;
    }();
    auto it = index.find(name);
    if (it == index.end()) return std::nullopt;
    return it->second;
}

std::string disease_display_name(int index) {
    if (index < 0 || index >= kNumClasses) {
        throw std::invalid_argument("disease index out of range: " + std::to_string(index));
    }
    std::string s = disease_names()[static_cast<std::size_t>(index)];
    for (char& c : s) {
        if (c == '_') c = ' ';
    }
    return to_lower(s);
}

} // namespace cxrkit::data
