#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cxrkit/cli/commands.hpp"
#include "cxrkit/cli/run_config.hpp"
#include "cxrkit/common.hpp"

using namespace cxrkit;

int main(int argc, char** argv) {
    CLI::App app{"Label-efficient chest X-ray classification: encoder adaptation, "
                 "prompt scoring, few-shot fine-tuning, evaluation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string data_root;
    std::string output_dir;
    std::string backend_name;
    std::string weights_path;
    std::string tokenizer_path;
    std::uint64_t seed = 7;

    app.add_option("--config", config_path, "JSON config file (flags override file values)");
    app.add_option("--seed", seed, "global RNG seed, propagated to every stage");
    app.add_option("--data-root", data_root,
                   "dataset directory (Data_Entry_2017.csv, *_list.txt, images/)");
    app.add_option("--output-dir", output_dir, "directory for all written artifacts");
    app.add_option("--backend", backend_name, "encoder backend: 'real' or 'stub'")
        ->check(CLI::IsMember({"real", "stub"}));
    app.add_option("--weights-path", weights_path, "encoder weights file (real backend)");
    app.add_option("--tokenizer-path", tokenizer_path,
                   "BPE merges file for the real backend's text encoder");

    auto* adapt_cmd =
        app.add_subcommand("adapt", "fine-tune the top encoder blocks and train the head");
    adapt_cmd->fallthrough();

    auto* zeroshot_cmd = app.add_subcommand("zeroshot", "prompt-based scoring of the test split");
    zeroshot_cmd->fallthrough();
    std::string zeroshot_checkpoint;
    zeroshot_cmd->add_option("--checkpoint", zeroshot_checkpoint,
                             "adapted checkpoint (omit to score the unadapted backend)");

    auto* fewshot_cmd =
        app.add_subcommand("fewshot", "balanced N-shot head fine-tuning plus shots curve");
    fewshot_cmd->fallthrough();
    std::string fewshot_checkpoint;
    std::vector<int> shots{1, 2, 4, 8, 16};
    fewshot_cmd->add_option("--checkpoint", fewshot_checkpoint, "checkpoint to start from")
        ->required();
    fewshot_cmd->add_option("--shots", shots, "shot counts (default: 1 2 4 8 16)");

    auto* eval_cmd = app.add_subcommand("eval", "head-path test report for a checkpoint");
    eval_cmd->fallthrough();
    std::string eval_checkpoint;
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint to evaluate")->required();

    auto* report_cmd =
        app.add_subcommand("report", "render comparison tables from stored reports");
    report_cmd->fallthrough();
    std::vector<std::string> report_files;
    std::string baselines_path;
    report_cmd->add_option("--report", report_files, "evaluation report JSON (repeatable)")
        ->required();
    report_cmd->add_option("--baselines", baselines_path,
                           "baseline table JSON (e.g. data/reference_results.json)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        cli::RunConfig config = config_path.empty() ? cli::RunConfig{}
                                                    : cli::RunConfig::load_file(config_path);
        if (const char* env = std::getenv("CXRKIT_DATA_ROOT");
            env != nullptr && *env != '\0' && app.count("--data-root") == 0) {
            config.data_root = env;
            std::cerr << "note: data_root taken from CXRKIT_DATA_ROOT=" << env << "\n";
        }
        if (app.count("--data-root") > 0) config.data_root = data_root;
        if (app.count("--seed") > 0) config.seed = seed;
        if (app.count("--output-dir") > 0) config.output_dir = output_dir;
        if (app.count("--backend") > 0) {
            config.backend = cli::backend_choice_from_name(backend_name);
        }
        if (app.count("--weights-path") > 0) config.weights_path = weights_path;
        if (app.count("--tokenizer-path") > 0) config.tokenizer_path = tokenizer_path;
        config.propagate_seed();

        if (adapt_cmd->parsed()) {
            cli::run_adapt(config);
        } else if (zeroshot_cmd->parsed()) {
            cli::run_zeroshot(config, zeroshot_checkpoint.empty()
                                          ? std::nullopt
                                          : std::optional<std::string>(zeroshot_checkpoint));
        } else if (fewshot_cmd->parsed()) {
            cli::run_fewshot(config, fewshot_checkpoint, shots);
        } else if (eval_cmd->parsed()) {
            cli::run_eval(config, eval_checkpoint);
        } else if (report_cmd->parsed()) {
            cli::run_report(report_files,
                            baselines_path.empty() ? std::nullopt
                                                   : std::optional<std::string>(baselines_path),
                            config.output_dir);
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const TrainingAbort& e) {
        std::cerr << "training aborted: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
