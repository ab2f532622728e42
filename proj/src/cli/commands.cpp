#include "cxrkit/cli/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <span>
#include <utility>

#include "cxrkit/common.hpp"
#include "cxrkit/data/image.hpp"
#include "cxrkit/data/manifest.hpp"
#include "cxrkit/data/sampler.hpp"
#include "cxrkit/eval/baselines.hpp"
#include "cxrkit/eval/curve.hpp"
#include "cxrkit/eval/report.hpp"
#include "cxrkit/model/checkpoint.hpp"
#include "cxrkit/model/freeze.hpp"
#include "cxrkit/model/stub.hpp"
#include "cxrkit/model/vit.hpp"
#include "cxrkit/model/zeroshot.hpp"
#include "cxrkit/train/loop.hpp"

namespace fs = std::filesystem;

namespace cxrkit::cli {

namespace {

void require_valid(const RunConfig& config) {
    const auto errors = config.validate();
    if (errors.empty()) return;
    std::string message = "configuration invalid (" + std::to_string(errors.size()) + " problem" +
                          (errors.size() == 1 ? "" : "s") + "):";
    for (const std::string& e : errors) {
        message += "\n  - " + e;
    }
    throw ConfigError(message);
}

// Checks every required dataset file up front so nothing heavy runs when
// the data_root is wrong.
data::DatasetManifest load_dataset(const RunConfig& config) {
    const fs::path root = config.data_root;
    const fs::path manifest_path = root / "Data_Entry_2017.csv";
    const fs::path train_val_path = root / "train_val_list.txt";
    const fs::path test_path = root / "test_list.txt";

    std::string missing;
    for (const fs::path& p : {manifest_path, train_val_path, test_path}) {
        if (!fs::exists(p)) {
            if (!missing.empty()) missing += ", ";
            missing += p.string();
        }
    }
    if (!missing.empty()) {
        throw DataError("missing dataset files: " + missing);
    }

    auto manifest = data::load_manifest_file(manifest_path);
    const auto train_val_ids = data::load_id_list(train_val_path);
    const auto test_ids = data::load_id_list(test_path);
    data::assign_splits(manifest, train_val_ids, test_ids, config.val_fraction, config.seed);
    return manifest;
}

std::unique_ptr<model::EncoderBackend> make_backend(const RunConfig& config) {
    if (config.backend == BackendChoice::stub) {
        model::StubConfig stub;
        stub.seed = config.seed;
        return std::make_unique<model::StubBackend>(stub);
    }
    return model::VitBackend::from_weights_file(*config.weights_path,
                                                config.tokenizer_path.value_or(""));
}

data::DatasetManifest nonempty_split(const data::DatasetManifest& manifest, data::Split split,
                                     const std::string& what) {
    auto set = data::restrict_to_split(manifest, split);
    if (set.records.empty()) {
        throw DataError(what + " split is empty");
    }
    return set;
}

void fill_labels(const data::DatasetManifest& set, Eigen::MatrixXi& labels) {
    labels.resize(static_cast<Eigen::Index>(set.records.size()), data::kNumClasses);
    for (std::size_t i = 0; i < set.records.size(); ++i) {
        for (int c = 0; c < data::kNumClasses; ++c) {
            labels(static_cast<Eigen::Index>(i), c) =
                set.records[i].labels[static_cast<std::size_t>(c)];
        }
    }
}

// Embeds a whole split batch by batch (no augmentation, manifest order).
Eigen::MatrixXf embed_split(const model::EncoderBackend& backend,
                            const data::DatasetManifest& set,
                            const data::ImageProvider& provider,
                            const data::PreprocessSpec& preprocess, int batch_size) {
    const std::size_t n = set.records.size();
    Eigen::MatrixXf features(static_cast<Eigen::Index>(n), backend.embed_dim());
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(n, start + static_cast<std::size_t>(batch_size));
        std::vector<data::Image> images;
        images.reserve(end - start);
        for (std::size_t i = start; i < end; ++i) {
            images.push_back(data::preprocess(provider.load(set.records[i].image_id), preprocess));
        }
        features.middleRows(static_cast<Eigen::Index>(start),
                            static_cast<Eigen::Index>(end - start)) =
            backend.image_features(images);
    }
    return features;
}

eval::ScoreMatrix score_with_head(const model::EncoderBackend& backend,
                                  const model::ClassifierHead& head,
                                  const data::DatasetManifest& set,
                                  const data::ImageProvider& provider,
                                  const data::PreprocessSpec& preprocess, int batch_size) {
    eval::ScoreMatrix matrix;
    matrix.scores = head.forward(embed_split(backend, set, provider, preprocess, batch_size));
    fill_labels(set, matrix.labels);
    matrix.source = eval::ScoreSource::head_logits;
    return matrix;
}

eval::ScoreMatrix score_with_prompts(const model::EncoderBackend& backend,
                                     const model::PromptEmbeddings& embeddings,
                                     const data::DatasetManifest& set,
                                     const data::ImageProvider& provider,
                                     const data::PreprocessSpec& preprocess, int batch_size) {
    eval::ScoreMatrix matrix;
    matrix.scores = model::zero_shot_scores(
        embed_split(backend, set, provider, preprocess, batch_size), embeddings);
    fill_labels(set, matrix.labels);
    matrix.source = eval::ScoreSource::zero_shot_prompts;
    return matrix;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError(path.string() + ": cannot open for writing");
    }
    out << content;
}

void write_report_file(const fs::path& path, const eval::EvalReport& report) {
    write_file(path, report.to_json().dump(2) + "\n");
}

eval::EvalReport read_report_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError(path + ": cannot open report file");
    }
    nlohmann::json j;
    try {
        in >> j;
        return eval::EvalReport::from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(path + ": " + e.what());
    }
}

std::string auc_line(const eval::EvalReport& report) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", report.mean_auc);
    return buf;
}

} // namespace

void run_adapt(const RunConfig& config) {
    require_valid(config);
    const auto manifest = load_dataset(config);
    const auto train_set = nonempty_split(manifest, data::Split::train, "training");
    const auto val_set = nonempty_split(manifest, data::Split::val, "validation");
    const auto test_set = nonempty_split(manifest, data::Split::test, "test");

    auto backend = make_backend(config);
    model::HeadConfig head_config;
    head_config.in_dim = backend->embed_dim();
    model::ClassifierHead head(head_config, config.seed);
    const auto freeze_report = model::apply_freeze_policy(*backend, config.adaptation.freeze);

    const std::int64_t head_params = head.params().total_params();
    std::cout << "adapt: " << train_set.records.size() << " train / " << val_set.records.size()
              << " val / " << test_set.records.size() << " test images\n";
    std::cout << "adapt: " << freeze_report.trainable_with_head(head_params) << " of "
              << freeze_report.total_with_head(head_params) << " parameters trainable\n";

    data::DirectoryImageProvider provider(config.data_root);
    const auto trace =
        train::adapt(*backend, head, train_set, val_set, provider, freeze_report,
                     config.adaptation);

    const fs::path out_dir = config.output_dir;
    fs::create_directories(out_dir);

    model::CheckpointMeta meta;
    meta.freeze_policy = config.adaptation.freeze;
    meta.prompts = config.prompts;
    meta.seed = config.seed;
    meta.epoch = trace.best_epoch;
    for (const auto& record : trace.records) {
        meta.val_auc_history.push_back(record.val_mean_auc);
    }
    meta.source_note = "adapt, config digest " + config.digest();
    const fs::path checkpoint_path = out_dir / "adapted.ckpt";
    model::save_checkpoint(checkpoint_path, *backend, &head, meta);

    const nlohmann::json trace_header{{"config_digest", config.digest()},
                                      {"seed", config.seed}};
    write_file(out_dir / "adapt_trace.jsonl", trace_header.dump() + "\n" + trace.to_jsonl());

    auto report = eval::evaluate(score_with_head(*backend, head, test_set, provider,
                                                 config.adaptation.preprocess,
                                                 config.adaptation.batch_size));
    report.seed = config.seed;
    report.config_digest = config.digest();
    report.metadata = {{"stage", "adapt"},
                       {"checkpoint", checkpoint_path.filename().string()},
                       {"best_epoch", trace.best_epoch},
                       {"stop_reason", trace.stop_reason}};
    write_report_file(out_dir / "adapt_eval.json", report);

    std::cout << "adapt: best val mean AUC " << trace.best_val_auc << " at epoch "
              << trace.best_epoch << " (" << trace.stop_reason << ")\n";
    std::cout << "adapt: test mean AUC " << auc_line(report) << "\n";
    std::cout << "adapt: wrote " << checkpoint_path.string() << ", adapt_trace.jsonl, "
              << "adapt_eval.json\n";
}

void run_zeroshot(const RunConfig& config, const std::optional<std::string>& checkpoint_path) {
    require_valid(config);
    const auto manifest = load_dataset(config);
    const auto test_set = nonempty_split(manifest, data::Split::test, "test");

    std::unique_ptr<model::EncoderBackend> backend;
    bool adapted = false;
    if (checkpoint_path.has_value()) {
        auto checkpoint = model::load_checkpoint(*checkpoint_path);
        backend = std::move(checkpoint.backend);
        adapted = true;
    } else {
        backend = make_backend(config);
    }
    if (!backend->has_text_encoder()) {
        throw ConfigError("zero-shot scoring needs a text-capable backend (real backend: pass "
                          "tokenizer_path; stub backend: enable with_text)");
    }

    const auto embeddings = model::embed_prompts(*backend, config.prompts);
    data::DirectoryImageProvider provider(config.data_root);
    auto report = eval::evaluate(score_with_prompts(*backend, embeddings, test_set, provider,
                                                    config.adaptation.preprocess,
                                                    config.adaptation.batch_size));
    report.seed = config.seed;
    report.config_digest = config.digest();
    nlohmann::json rendered = nlohmann::json::array();
    for (int c = 0; c < data::kNumClasses; ++c) {
        rendered.push_back(config.prompts.positive_for_class(c));
    }
    report.metadata = {{"stage", "zeroshot"},
                       {"adapted", adapted},
                       {"checkpoint", checkpoint_path.has_value() ? nlohmann::json(*checkpoint_path)
                                                                  : nlohmann::json(nullptr)},
                       {"prompts", config.prompts.to_json()},
                       {"rendered_prompts", rendered},
                       {"negative_prompt", config.prompts.negative_prompt},
                       {"temperature", embeddings.temperature}};

    const fs::path out_dir = config.output_dir;
    fs::create_directories(out_dir);
    write_report_file(out_dir / "zeroshot_eval.json", report);

    std::cout << "zeroshot: " << (adapted ? "adapted" : "unadapted") << " backend, test mean AUC "
              << auc_line(report) << "\n";
    std::cout << "zeroshot: wrote zeroshot_eval.json\n";
}

void run_fewshot(const RunConfig& config, const std::string& checkpoint_path,
                 std::vector<int> shots) {
    require_valid(config);
    if (shots.empty()) {
        throw ConfigError("fewshot: at least one shot count is required");
    }
    std::sort(shots.begin(), shots.end());
    for (int n : shots) {
        if (n == 0) {
            throw ConfigError("fewshot: 0 shots is the baseline row and is produced "
                              "automatically; request counts >= 1");
        }
        if (n < 0) {
            throw ConfigError("fewshot: shot counts must be >= 1");
        }
    }
    if (std::adjacent_find(shots.begin(), shots.end()) != shots.end()) {
        throw ConfigError("fewshot: duplicate shot counts");
    }

    const auto manifest = load_dataset(config);
    const auto train_pool = nonempty_split(manifest, data::Split::train, "training");
    const auto test_set = nonempty_split(manifest, data::Split::test, "test");

    auto checkpoint = model::load_checkpoint(checkpoint_path);
    model::EncoderBackend& backend = *checkpoint.backend;
    if (!backend.has_text_encoder()) {
        throw ConfigError("fewshot: the automatic 0-shot baseline needs a text-capable backend");
    }
    const bool head_from_checkpoint = checkpoint.head.has_value();
    model::HeadConfig fresh_config;
    fresh_config.in_dim = backend.embed_dim();
    const model::ClassifierHead base_head = head_from_checkpoint
                                                ? *checkpoint.head
                                                : model::ClassifierHead(fresh_config, config.seed);

    data::DirectoryImageProvider provider(config.data_root);
    const fs::path out_dir = config.output_dir;
    fs::create_directories(out_dir);

    std::vector<eval::EvalReport> reports;
    {
        const auto embeddings = model::embed_prompts(backend, config.prompts);
        auto report = eval::evaluate(score_with_prompts(backend, embeddings, test_set, provider,
                                                        config.fewshot.preprocess,
                                                        config.fewshot.batch_size));
        report.n_shots = 0;
        report.seed = config.seed;
        report.config_digest = config.digest();
        report.metadata = {{"stage", "fewshot"},
                           {"checkpoint", checkpoint_path},
                           {"prompts", config.prompts.to_json()},
                           {"note", "0-shot baseline: prompt scoring, no head"}};
        write_report_file(out_dir / "fewshot_eval_0.json", report);
        std::cout << "fewshot: n=0 (prompt baseline) test mean AUC " << auc_line(report) << "\n";
        reports.push_back(std::move(report));
    }

    for (int n : shots) {
        const auto subset = data::sample_few_shot(train_pool, n, config.seed);
        const std::string tag = std::to_string(n);
        data::write_subset(subset, out_dir / ("fewshot_subset_" + tag + ".txt"),
                           out_dir / ("fewshot_subset_" + tag + ".json"));

        model::ClassifierHead head = base_head;
        const auto losses =
            train::fewshot_finetune(backend, head, data::restrict_to_subset(train_pool, subset),
                                    provider, config.fewshot);

        auto report = eval::evaluate(score_with_head(backend, head, test_set, provider,
                                                     config.fewshot.preprocess,
                                                     config.fewshot.batch_size));
        report.n_shots = n;
        report.seed = config.seed;
        report.config_digest = config.digest();
        report.metadata = {{"stage", "fewshot"},
                           {"checkpoint", checkpoint_path},
                           {"subset_size", subset.record_ids.size()},
                           {"skipped_classes", subset.skipped_classes},
                           {"final_train_loss", losses.back()},
                           {"head_init", head_from_checkpoint ? "checkpoint" : "fresh"}};
        write_report_file(out_dir / ("fewshot_eval_" + tag + ".json"), report);
        std::cout << "fewshot: n=" << n << " test mean AUC " << auc_line(report) << "\n";
        reports.push_back(std::move(report));
    }

    const auto curve = eval::shots_curve(reports);
    write_file(out_dir / "shots_curve.csv", eval::curve_to_csv(curve));
    write_file(out_dir / "shots_curve.svg", eval::curve_to_svg(curve));
    std::cout << "fewshot: wrote " << reports.size() << " reports, shots_curve.csv, "
              << "shots_curve.svg\n";
}

void run_eval(const RunConfig& config, const std::string& checkpoint_path) {
    require_valid(config);
    const auto manifest = load_dataset(config);
    const auto test_set = nonempty_split(manifest, data::Split::test, "test");

    auto checkpoint = model::load_checkpoint(checkpoint_path);
    if (!checkpoint.head.has_value()) {
        throw ConfigError("eval: checkpoint has no classification head; use the zeroshot "
                          "command for prompt scoring");
    }

    data::DirectoryImageProvider provider(config.data_root);
    auto report = eval::evaluate(score_with_head(*checkpoint.backend, *checkpoint.head, test_set,
                                                 provider, config.adaptation.preprocess,
                                                 config.adaptation.batch_size));
    report.seed = config.seed;
    report.config_digest = config.digest();
    report.metadata = {{"stage", "eval"},
                       {"checkpoint", checkpoint_path},
                       {"checkpoint_epoch", checkpoint.meta.epoch},
                       {"checkpoint_note", checkpoint.meta.source_note}};

    const fs::path out_dir = config.output_dir;
    fs::create_directories(out_dir);
    write_report_file(out_dir / "eval.json", report);
    std::cout << "eval: test mean AUC " << auc_line(report) << "\n";
    std::cout << "eval: wrote eval.json\n";
}

void run_report(const std::vector<std::string>& report_paths,
                const std::optional<std::string>& baselines_path, const std::string& output_dir) {
    if (report_paths.empty()) {
        throw ConfigError("report: at least one report file is required");
    }
    std::vector<std::pair<std::string, eval::EvalReport>> reports;
    for (const std::string& path : report_paths) {
        reports.emplace_back(fs::path(path).stem().string(), read_report_file(path));
    }

    const fs::path out_dir = output_dir;
    fs::create_directories(out_dir);

    if (baselines_path.has_value()) {
        const auto table = eval::load_baseline_table(*baselines_path);
        for (const auto& [stem, report] : reports) {
            const auto comparison = eval::compare_with_baselines(report, stem, table);
            write_file(out_dir / ("comparison_" + stem + ".csv"),
                       eval::comparison_to_csv(comparison));
            const std::string text = eval::comparison_to_text(comparison);
            write_file(out_dir / ("comparison_" + stem + ".txt"), text);
            std::cout << text << "\n";
        }
        std::cout << "report: wrote " << reports.size() << " comparison table(s) to "
                  << out_dir.string() << "\n";
        return;
    }

    // No baselines: plain side-by-side per-class table of the given reports.
    eval::ComparisonTable table;
    for (const auto& [stem, report] : reports) {
        table.column_names.push_back(stem);
    }
    for (int c = 0; c < data::kNumClasses; ++c) {
        eval::ComparisonRow row;
        row.label = data::disease_names()[static_cast<std::size_t>(c)];
        for (const auto& [stem, report] : reports) {
            row.values.push_back(report.per_class_auc[static_cast<std::size_t>(c)]);
        }
        table.rows.push_back(std::move(row));
    }
    eval::ComparisonRow average;
    average.label = "Average";
    for (const auto& [stem, report] : reports) {
        average.values.emplace_back(report.mean_auc);
    }
    table.rows.push_back(std::move(average));

    const std::string text = eval::comparison_to_text(table);
    write_file(out_dir / "report_table.txt", text);
    std::cout << text << "\n";
    std::cout << "report: wrote report_table.txt to " << out_dir.string() << "\n";
}

} // namespace cxrkit::cli
