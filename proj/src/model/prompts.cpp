#include "cxrkit/model/prompts.hpp"

#include <stdexcept>

#include "cxrkit/common.hpp"
#include "cxrkit/data/labels.hpp"

namespace cxrkit::model {

namespace {
constexpr std::string_view kPlaceholder = "[disease]";
}

std::string PromptSet::positive_for_class(int class_index) const {
    const std::string name = data::disease_display_name(class_index);
    std::string out = positive_template;
    const auto pos = out.find(kPlaceholder);
    if (pos == std::string::npos) {
        throw std::invalid_argument("prompt template is missing the [disease] placeholder");
    }
    out.replace(pos, kPlaceholder.size(), name);
    return out;
}

std::vector<std::string> PromptSet::all_positive() const {
    std::vector<std::string> prompts;
    prompts.reserve(data::kNumClasses);
    for (int c = 0; c < data::kNumClasses; ++c) prompts.push_back(positive_for_class(c));
    return prompts;
}

nlohmann::json PromptSet::to_json() const {
    return {{"positive_template", positive_template}, {"negative_prompt", negative_prompt}};
}

PromptSet PromptSet::from_json(const nlohmann::json& j) {
    PromptSet prompts;
    prompts.positive_template = j.value("positive_template", prompts.positive_template);
    prompts.negative_prompt = j.value("negative_prompt", prompts.negative_prompt);
    return prompts;
}

void validate_prompts(const PromptSet& prompts) {
    if (prompts.positive_template.find(kPlaceholder) == std::string::npos) {
        throw std::invalid_argument("prompt template is missing the [disease] placeholder");
    }
    if (trim(prompts.negative_prompt).empty()) {
        throw std::invalid_argument("negative prompt must not be empty");
    }
}

} // namespace cxrkit::model
