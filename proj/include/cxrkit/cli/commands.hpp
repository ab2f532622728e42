#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cxrkit/cli/run_config.hpp"

namespace cxrkit::cli {

// Command bodies behind the subcommands. All of them signal failure by
// throwing: ConfigError (exit 2), DataError (exit 3), TrainingAbort
// (exit 4); the entry point maps exceptions to exit codes. Artifacts are
// written only under config.output_dir.

// Full adaptation run: checkpoint, training trace, test-split report.
void run_adapt(const RunConfig& config);

// Prompt-similarity scoring of the test split. Without a checkpoint the
// unadapted backend is scored and the report says so.
void run_zeroshot(const RunConfig& config, const std::optional<std::string>& checkpoint_path);

// Balanced N-shot head fine-tuning per requested shot count, plus the
// automatic 0-shot prompt baseline; emits reports and the shots curve.
void run_fewshot(const RunConfig& config, const std::string& checkpoint_path,
                 std::vector<int> shots);

// Head-path test-split report for an existing checkpoint.
void run_eval(const RunConfig& config, const std::string& checkpoint_path);

// Renders comparison tables from stored reports; with no baseline file a
// plain per-class table is produced instead.
void run_report(const std::vector<std::string>& report_paths,
                const std::optional<std::string>& baselines_path, const std::string& output_dir);

} // namespace cxrkit::cli
