#ifndef REWRITEQA_COMMANDS_H_
#define REWRITEQA_COMMANDS_H_

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "rewriteqa/aware_rewriter.h"
#include "rewriteqa/config.h"
#include "rewriteqa/evaluation.h"

namespace rewriteqa {

// Filters cfg.dataset into the train/test split files and prints
// "train=<n> test=<m>".
void cmd_prepare(const PipelineConfig& cfg, std::ostream& out);

// Rewrites every record of the configured split and writes
// output_dir/decisions_<mode>.jsonl. Records with no entities fall back to a
// passthrough decision. Returns the decisions path.
std::filesystem::path cmd_rewrite(const PipelineConfig& cfg, RewriteMode mode, std::ostream& out);

// Trains the aware rewriter on the train split; checkpoints go to
// cfg.checkpoint_dir and the metrics log to output_dir/metrics.jsonl.
TrainState cmd_train(const PipelineConfig& cfg, bool resume, std::ostream& out);

// Answers each configured system (or every decisions_<mode>.jsonl found in
// output_dir), scores EM/BS (+HE when the grades log exists) and writes
// predictions_<system>.jsonl, report.json and report.txt.
EvaluationReport cmd_eval(const PipelineConfig& cfg, std::ostream& out);

std::filesystem::path decisions_path(const PipelineConfig& cfg, RewriteMode mode);
std::filesystem::path predictions_path(const PipelineConfig& cfg, const std::string& system);

// Gold answers of the split `cfg.rewrite_split`.
GoldMap load_golds(const PipelineConfig& cfg);

}  // namespace rewriteqa

#endif  // REWRITEQA_COMMANDS_H_
