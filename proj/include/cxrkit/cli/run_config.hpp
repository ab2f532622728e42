#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cxrkit/model/prompts.hpp"
#include "cxrkit/train/loop.hpp"

namespace cxrkit::cli {

enum class BackendChoice { real, stub };

std::string backend_choice_name(BackendChoice choice);
BackendChoice backend_choice_from_name(const std::string& name);

// Everything a command run depends on. Serialized form doubles as the
// config file format; its digest is stamped into every artifact.
struct RunConfig {
    std::string data_root;
    BackendChoice backend = BackendChoice::stub;
    std::optional<std::string> weights_path;
    std::optional<std::string> tokenizer_path;  // real backend text encoder
    std::uint64_t seed = 7;
    double val_fraction = 0.1;  // patient-grouped slice of the train_val list
    train::AdaptationConfig adaptation{};
    train::FewShotConfig fewshot{};
    model::PromptSet prompts{};
    std::string output_dir = "runs";

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load_file(const std::string& path);

    // Every problem at once, empty when the config is usable.
    std::vector<std::string> validate() const;

    // Copies the top-level seed into each nested stage config.
    void propagate_seed();

    // FNV-1a over the canonical serialized form.
    std::string digest() const;
};

} // namespace cxrkit::cli
