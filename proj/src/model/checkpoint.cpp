#include "cxrkit/model/checkpoint.hpp"

#include "cxrkit/common.hpp"
#include "cxrkit/model/stub.hpp"
#include "cxrkit/model/tensor_file.hpp"
#include "cxrkit/model/vit.hpp"

namespace cxrkit::model {

namespace {

constexpr const char* kFormatTag = "cxrkit-checkpoint-1";

nlohmann::json parse_meta_json(const std::filesystem::path& path,
                               const std::map<std::string, std::string>& metadata,
                               const std::string& key) {
    const auto it = metadata.find(key);
    if (it == metadata.end()) {
        throw DataError(path.string() + ": checkpoint metadata is missing \"" + key + "\"");
    }
    try {
        return nlohmann::json::parse(it->second);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": checkpoint metadata \"" + key +
                        "\" is not valid JSON: " + e.what());
    }
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const EncoderBackend& backend,
                     const ClassifierHead* head, const CheckpointMeta& meta) {
    std::vector<std::pair<std::string, const Tensor*>> tensors;
    for (const auto& name : backend.params().names()) {
        tensors.emplace_back("encoder." + name, &backend.params().at(name));
    }
    if (head != nullptr) {
        for (const auto& name : head->params().names()) {
            tensors.emplace_back("head." + name, &head->params().at(name));
        }
    }

    std::map<std::string, std::string> metadata;
    metadata["format"] = kFormatTag;
    metadata["backend_kind"] = backend.kind();
    metadata["backend_config"] = backend.config_json().dump();
    if (head != nullptr) metadata["head_config"] = head->config_json().dump();
    metadata["freeze_policy"] = meta.freeze_policy.to_json().dump();
    metadata["prompts"] = meta.prompts.to_json().dump();
    metadata["seed"] = std::to_string(meta.seed);
    metadata["epoch"] = std::to_string(meta.epoch);
    metadata["val_auc_history"] = nlohmann::json(meta.val_auc_history).dump();
    metadata["source_note"] = meta.source_note;

    write_tensor_file(path, tensors, metadata);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    TensorFile file = read_tensor_file(path);
    const auto format = file.metadata.find("format");
    if (format == file.metadata.end() || format->second != kFormatTag) {
        throw DataError(path.string() + ": not a recognized checkpoint file");
    }

    ParamStore encoder_params;
    ParamStore head_params;
    for (auto& [name, tensor] : file.tensors) {
        if (name.rfind("encoder.", 0) == 0) {
            encoder_params.add(name.substr(8), std::move(tensor));
        } else if (name.rfind("head.", 0) == 0) {
            head_params.add(name.substr(5), std::move(tensor));
        } else {
            throw DataError(path.string() + ": unexpected tensor \"" + name + "\"");
        }
    }

    Checkpoint out;
    const auto kind_it = file.metadata.find("backend_kind");
    if (kind_it == file.metadata.end()) {
        throw DataError(path.string() + ": checkpoint metadata is missing \"backend_kind\"");
    }
    const nlohmann::json backend_config = parse_meta_json(path, file.metadata, "backend_config");
    if (kind_it->second == "stub") {
        out.backend = std::make_unique<StubBackend>(StubBackend::config_from_json(backend_config),
                                                    std::move(encoder_params));
    } else if (kind_it->second == "vit") {
        out.backend = std::make_unique<VitBackend>(VitBackend::config_from_json(backend_config),
                                                   std::move(encoder_params));
    } else {
        throw DataError(path.string() + ": unknown backend kind \"" + kind_it->second + "\"");
    }

    if (file.metadata.count("head_config") != 0) {
        const nlohmann::json head_config = parse_meta_json(path, file.metadata, "head_config");
        out.head.emplace(ClassifierHead::config_from_json(head_config), std::move(head_params));
    } else if (!head_params.names().empty()) {
        throw DataError(path.string() + ": head tensors present but head_config missing");
    }

    out.meta.freeze_policy =
        FreezePolicy::from_json(parse_meta_json(path, file.metadata, "freeze_policy"));
    out.meta.prompts = PromptSet::from_json(parse_meta_json(path, file.metadata, "prompts"));
    try {
        out.meta.seed = std::stoull(file.metadata.at("seed"));
        out.meta.epoch = std::stoi(file.metadata.at("epoch"));
    } catch (const std::exception&) {
        throw DataError(path.string() + ": malformed seed/epoch metadata");
    }
    const nlohmann::json history = parse_meta_json(path, file.metadata, "val_auc_history");
    out.meta.val_auc_history = history.get<std::vector<double>>();
    if (file.metadata.count("source_note") != 0) {
        out.meta.source_note = file.metadata.at("source_note");
    }
    return out;
}

} // namespace cxrkit::model
