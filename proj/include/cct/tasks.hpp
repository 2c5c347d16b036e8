#ifndef CCT_TASKS_HPP
#define CCT_TASKS_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cct/metrics.hpp"
#include "cct/model.hpp"
#include "cct/record.hpp"
#include "cct/sampler.hpp"
#include "cct/trainer.hpp"
#include "cct/vocab.hpp"

namespace cct {

enum class DownstreamTask { CommitMsgGen, CommentUpdate, DefectPredict, QualityEstimate, ReviewGen };
enum class TaskKind { Generation, Classification };

struct TaskSpec {
  DownstreamTask task = DownstreamTask::CommitMsgGen;
  TaskKind kind = TaskKind::Generation;
  std::vector<std::string> metrics;
};

TaskSpec task_spec(DownstreamTask task);
std::string downstream_task_name(DownstreamTask task);  // "commit-msg-gen", ...
Expected<DownstreamTask> downstream_task_from_name(const std::string& name);

// One assembled example. Generation rows carry target tokens (plus source
// tokens where the metric needs them); classification rows carry the label,
// with `true` always meaning the positive class of the task's F1.
struct TaskRow {
  std::string record_id;
  std::vector<std::string> input_tokens;
  std::vector<std::string> target_tokens;
  std::vector<std::string> source_tokens;
  bool label = false;
};

struct TaskDataset {
  TaskSpec spec;
  std::vector<TaskRow> rows;
  std::size_t skipped_missing_label = 0;
  std::size_t skipped_bad_diff = 0;
};

// Input assembly per task:
//   commit-msg-gen:   change encoding -> message tokens
//   comment-update:   change encoding ++ [SEP] ++ old comment -> new comment
//   defect-predict:   change encoding, label = defective
//   quality-estimate: change encoding, label = needs-review (low quality)
//   review-gen:       change encoding -> review tokens
TaskDataset build_task_dataset(const std::vector<CommitRecord>& records, DownstreamTask task);

enum class SplitMode { Random, ByTimestamp };

struct SplitSpec {
  SplitMode mode = SplitMode::Random;
  double train_fraction = 0.6;
  double valid_fraction = 0.2;
  double test_fraction = 0.2;
  std::uint64_t seed = 1;
  // When non-empty these override the fraction-based assignment.
  std::set<std::string> train_ids, valid_ids, test_ids;

  void validate() const;
};

struct SplitResult {
  std::vector<CommitRecord> train, valid, test;
};

// ByTimestamp sorts each project chronologically and cuts per-project at the
// configured fractions (defaults 60/20/20); Random shuffles with the seed.
SplitResult split_dataset(const std::vector<CommitRecord>& records, const SplitSpec& spec);

// Vocabulary over change encodings, messages, and any label texts.
Vocabulary build_corpus_vocab(const std::vector<CommitRecord>& records, std::uint64_t min_freq = 1);

// ---------------------------------------------------------------------------
// Pre-training / fine-tuning drivers (float pipeline)
// ---------------------------------------------------------------------------

struct PretrainOptions {
  ModelConfig model;
  TrainConfig train;  // learning rate defaults to 5e-5
  SamplerConfig sampler;
  bool epoch_reseed = true;  // fresh masks every epoch
  int workers = 1;
};

struct PretrainResult {
  ModelParams<float> params;
  std::vector<TraceRow> trace;
  InputStats input_stats;
  int steps_run = 0;
  double first_epoch_initial_loss = 0.0;  // mean combined loss of the first batch
};

PretrainResult pretrain(const std::vector<CommitRecord>& records, const Vocabulary& vocab,
                        const PretrainOptions& options);

struct FinetuneOptions {
  TrainConfig train;            // learning_rate <= 0 picks the per-kind default
  int eval_interval = 50;       // steps between validation passes
  int patience = 3;             // evaluations without improvement before stopping
};

struct FinetuneResult {
  ModelParams<float> params;  // best-validation checkpoint
  double best_valid_metric = 0.0;
  int steps_run = 0;
  std::vector<TraceRow> trace;
  InputStats input_stats;
};

// Generation tasks fine-tune the full encoder-decoder at 5e-5; classification
// tasks train the [CLS] head plus encoder at 2e-5. Early-stops on a
// validation-metric plateau and returns the best checkpoint.
FinetuneResult finetune(const ModelParams<float>& init, const Vocabulary& vocab, const TaskDataset& train,
                        const TaskDataset& valid, const FinetuneOptions& options);

struct EvalResult {
  std::vector<MetricReport> reports;
  std::vector<std::string> example_ids;
  std::vector<std::vector<std::string>> decoded;  // generation tasks
  std::vector<double> probabilities;              // classification tasks
};

// Greedy-decodes or classifies every test row and computes the task's
// metric set; parameters are untouched.
EvalResult evaluate_task(const ModelParams<float>& params, const Vocabulary& vocab, const TaskDataset& test);

// ---------------------------------------------------------------------------
// Ablation: full pre-training vs one task removed (same seeds), both
// fine-tuned and evaluated on the chosen downstream task.
// ---------------------------------------------------------------------------

struct AblationOptions {
  PretrainOptions pretrain;
  FinetuneOptions finetune;
  SplitSpec split;
  PretrainTask excluded = PretrainTask::Pl2nl;
  DownstreamTask downstream = DownstreamTask::CommentUpdate;
};

struct AblationVariant {
  std::string name;  // "full" or "minus-<task>"
  std::map<std::string, double> metrics;
};

struct AblationReport {
  AblationVariant full;
  AblationVariant reduced;
  std::string excluded_task;
  std::string downstream_task;
};

AblationReport run_ablation(const std::vector<CommitRecord>& records, const AblationOptions& options);

std::string ablation_markdown(const AblationReport& report);

}  // namespace cct

#endif  // CCT_TASKS_HPP
