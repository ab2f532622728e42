#include "cxrkit/cli/run_config.hpp"

#include <fstream>
#include <stdexcept>

#include "cxrkit/common.hpp"

namespace cxrkit::cli {

std::string backend_choice_name(BackendChoice choice) {
    switch (choice) {
    case BackendChoice::real: return "real";
    case BackendChoice::stub: return "stub";
    }
    throw std::invalid_argument("unknown backend choice");
}

BackendChoice backend_choice_from_name(const std::string& name) {
    if (name == "real") return BackendChoice::real;
    if (name == "stub") return BackendChoice::stub;
    throw ConfigError("backend must be 'real' or 'stub', got '" + name + "'");
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j{
        {"data_root", data_root},
        {"backend", backend_choice_name(backend)},
        {"weights_path", weights_path.has_value() ? nlohmann::json(*weights_path)
                                                  : nlohmann::json(nullptr)},
        {"tokenizer_path", tokenizer_path.has_value() ? nlohmann::json(*tokenizer_path)
                                                      : nlohmann::json(nullptr)},
        {"seed", seed},
        {"val_fraction", val_fraction},
        {"adaptation", adaptation.to_json()},
        {"fewshot", fewshot.to_json()},
        {"prompts", prompts.to_json()},
        {"output_dir", output_dir},
    };
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    c.data_root = j.value("data_root", c.data_root);
    if (j.contains("backend")) {
        c.backend = backend_choice_from_name(j.at("backend").get<std::string>());
    }
    if (j.contains("weights_path") && !j.at("weights_path").is_null()) {
        c.weights_path = j.at("weights_path").get<std::string>();
    }
    if (j.contains("tokenizer_path") && !j.at("tokenizer_path").is_null()) {
        c.tokenizer_path = j.at("tokenizer_path").get<std::string>();
    }
    c.seed = j.value("seed", c.seed);
    c.val_fraction = j.value("val_fraction", c.val_fraction);
    if (j.contains("adaptation")) {
        c.adaptation = train::AdaptationConfig::from_json(j.at("adaptation"));
    }
    if (j.contains("fewshot")) {
        c.fewshot = train::FewShotConfig::from_json(j.at("fewshot"));
    }
    if (j.contains("prompts")) {
        c.prompts = model::PromptSet::from_json(j.at("prompts"));
    }
    c.output_dir = j.value("output_dir", c.output_dir);
    return c;
}

RunConfig RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(path + ": cannot open config file");
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    try {
        return from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::vector<std::string> RunConfig::validate() const {
    std::vector<std::string> errors;
    const auto require = [&errors](bool ok, const std::string& message) {
        if (!ok) errors.push_back(message);
    };

    require(!data_root.empty(), "data_root is required");
    require(!output_dir.empty(), "output_dir is required");
    require(backend != BackendChoice::real || weights_path.has_value(),
            "backend 'real' requires weights_path");
    require(val_fraction >= 0.0 && val_fraction < 1.0, "val_fraction must be in [0, 1)");

    const auto& a = adaptation;
    require(a.batch_size >= 1, "adaptation.batch_size must be >= 1");
    require(a.max_epochs >= 1, "adaptation.max_epochs must be >= 1");
    require(a.early_stop_patience >= 1, "adaptation.early_stop_patience must be >= 1");
    require(a.encoder_lr > 0.0, "adaptation.encoder_lr must be positive");
    require(a.head_lr > 0.0, "adaptation.head_lr must be positive");
    require(a.encoder_lr < a.head_lr || a.encoder_lr <= 0.0 || a.head_lr <= 0.0,
            "adaptation.encoder_lr must stay below adaptation.head_lr");
    require(a.weight_decay >= 0.0, "adaptation.weight_decay must be >= 0");
    require(a.grad_clip_max_norm > 0.0, "adaptation.grad_clip_max_norm must be positive");
    require(a.focal.alpha > 0.0 && a.focal.alpha <= 1.0, "adaptation.focal.alpha must be in (0, 1]");
    require(a.focal.gamma >= 0.0, "adaptation.focal.gamma must be >= 0");
    require(a.plateau.factor > 0.0 && a.plateau.factor < 1.0,
            "adaptation.plateau.factor must be in (0, 1)");
    require(a.plateau.patience >= 1, "adaptation.plateau.patience must be >= 1");
    require(a.plateau.min_lr >= 0.0, "adaptation.plateau.min_lr must be >= 0");
    require(a.freeze.k_top_blocks >= 0, "adaptation.freeze.k_top_blocks must be >= 0");
    require(a.preprocess.target_size > 0, "adaptation.preprocess.target_size must be positive");

    const auto& g = a.augmentation;
    require(g.hflip_prob >= 0.0f && g.hflip_prob <= 1.0f,
            "adaptation.augmentation.hflip_prob must be in [0, 1]");
    require(g.rotation_deg >= 0.0f, "adaptation.augmentation.rotation_deg must be >= 0");
    require(g.translate_frac >= 0.0f && g.translate_frac < 1.0f,
            "adaptation.augmentation.translate_frac must be in [0, 1)");
    require(g.scale_min > 0.0f && g.scale_min <= g.scale_max,
            "adaptation.augmentation scale range must satisfy 0 < scale_min <= scale_max");
    require(g.brightness >= 0.0f && g.brightness < 1.0f,
            "adaptation.augmentation.brightness must be in [0, 1)");
    require(g.contrast >= 0.0f && g.contrast < 1.0f,
            "adaptation.augmentation.contrast must be in [0, 1)");
    require(g.saturation >= 0.0f && g.saturation < 1.0f,
            "adaptation.augmentation.saturation must be in [0, 1)");

    require(fewshot.batch_size >= 1, "fewshot.batch_size must be >= 1");
    require(fewshot.epochs >= 1, "fewshot.epochs must be >= 1");
    require(fewshot.head_lr > 0.0, "fewshot.head_lr must be positive");
    require(fewshot.weight_decay >= 0.0, "fewshot.weight_decay must be >= 0");
    require(fewshot.preprocess.target_size > 0, "fewshot.preprocess.target_size must be positive");

    try {
        model::validate_prompts(prompts);
    } catch (const std::invalid_argument& e) {
        errors.emplace_back(std::string("prompts: ") + e.what());
    }
    return errors;
}

void RunConfig::propagate_seed() {
    adaptation.seed = seed;
    fewshot.seed = seed;
}

std::string RunConfig::digest() const {
    // The artifact location is not part of the experiment: two runs that
    // differ only in output_dir must produce identical artifacts.
    nlohmann::json j = to_json();
    j.erase("output_dir");
    return to_hex(fnv1a64(j.dump()));
}

} // namespace cxrkit::cli
