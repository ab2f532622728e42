#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace cxrkit::data {

inline constexpr int kNumClasses = 14;

// Canonical finding names in fixed index order, using the source CSV spelling.
const std::array<std::string, kNumClasses>& disease_names();

std::optional<int> disease_index(std::string_view name);

// Prompt-friendly form: underscores to spaces, lowercased
// ("Pleural_Thickening" -> "pleural thickening").
std::string disease_display_name(int index);

} // namespace cxrkit::data
