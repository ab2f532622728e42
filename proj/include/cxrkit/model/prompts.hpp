#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace cxrkit::model {

// Text prompts used for similarity-based scoring. The positive template
// must contain the `[disease]` placeholder; the negative prompt is shared
// across classes.
struct PromptSet {
    std::string positive_template = "A chest X-ray showing [disease]";
    std::string negative_prompt = "No finding";

    // Template with the placeholder substituted by the class display name.
    std::string positive_for_class(int class_index) const;
    std::vector<std::string> all_positive() const;

    nlohmann::json to_json() const;
    static PromptSet from_json(const nlohmann::json& j);
};

// Throws std::invalid_argument when the placeholder is missing or a prompt
// is empty.
void validate_prompts(const PromptSet& prompts);

} // namespace cxrkit::model
