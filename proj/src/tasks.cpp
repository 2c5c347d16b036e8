#include "cct/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cct/diff.hpp"
#include "cct/tokenizer.hpp"

namespace cct {

TaskSpec task_spec(DownstreamTask task) {
  switch (task) {
    case DownstreamTask::CommitMsgGen:
      return {task, TaskKind::Generation, {"bnorm"}};
    case DownstreamTask::CommentUpdate:
      return {task, TaskKind::Generation, {"gleu", "accuracy"}};
    case DownstreamTask::DefectPredict:
      return {task, TaskKind::Classification, {"f1", "auc"}};
    case DownstreamTask::QualityEstimate:
      return {task, TaskKind::Classification, {"f1", "auc"}};
    case DownstreamTask::ReviewGen:
      return {task, TaskKind::Generation, {"bleu4"}};
  }
  return {};
}

std::string downstream_task_name(DownstreamTask task) {
  switch (task) {
    case DownstreamTask::CommitMsgGen:
      return "commit-msg-gen";
    case DownstreamTask::CommentUpdate:
      return "comment-update";
    case DownstreamTask::DefectPredict:
      return "defect-predict";
    case DownstreamTask::QualityEstimate:
      return "quality-estimate";
    case DownstreamTask::ReviewGen:
      return "review-gen";
  }
  return "unknown";
}

Expected<DownstreamTask> downstream_task_from_name(const std::string& name) {
  for (DownstreamTask t : {DownstreamTask::CommitMsgGen, DownstreamTask::CommentUpdate, DownstreamTask::DefectPredict,
                           DownstreamTask::QualityEstimate, DownstreamTask::ReviewGen}) {
    if (downstream_task_name(t) == name) return t;
  }
  return Expected<DownstreamTask>::failure("unknown downstream task: " + name);
}

TaskDataset build_task_dataset(const std::vector<CommitRecord>& records, DownstreamTask task) {
  TaskDataset ds;
  ds.spec = task_spec(task);
  for (const CommitRecord& r : records) {
    Expected<CommitDiff> parsed = parse_unified_diff(r.diff_text);
    if (!parsed.ok()) {
      ++ds.skipped_bad_diff;
      continue;
    }
    const CommitDiff& diff = parsed.value();
    TaskRow row;
    row.record_id = r.id;
    switch (task) {
      case DownstreamTask::CommitMsgGen: {
        row.input_tokens = serialize_change(diff).tokens;
        row.target_tokens = tokenize(r.message, CaseMode::Fold);
        if (row.target_tokens.empty()) {
          ++ds.skipped_missing_label;
          continue;
        }
        break;
      }
      case DownstreamTask::CommentUpdate: {
        if (!r.label_old_comment || !r.label_new_comment) {
          ++ds.skipped_missing_label;
          continue;
        }
        row.input_tokens = serialize_change(diff).tokens;
        row.input_tokens.emplace_back(tok::kSep);
        row.source_tokens = tokenize(*r.label_old_comment);
        row.input_tokens.insert(row.input_tokens.end(), row.source_tokens.begin(), row.source_tokens.end());
        row.target_tokens = tokenize(*r.label_new_comment);
        if (row.target_tokens.empty()) {
          ++ds.skipped_missing_label;
          continue;
        }
        break;
      }
      case DownstreamTask::DefectPredict: {
        if (!r.label_defective) {
          ++ds.skipped_missing_label;
          continue;
        }
        row.input_tokens = serialize_change(diff).tokens;
        row.label = *r.label_defective;
        break;
      }
      case DownstreamTask::QualityEstimate: {
        if (!r.label_quality) {
          ++ds.skipped_missing_label;
          continue;
        }
        row.input_tokens = serialize_change(diff).tokens;
        row.label = !*r.label_quality;  // positive class: change needs review
        break;
      }
      case DownstreamTask::ReviewGen: {
        if (!r.label_review) {
          ++ds.skipped_missing_label;
          continue;
        }
        row.input_tokens = serialize_change(diff).tokens;
        row.target_tokens = tokenize(*r.label_review);
        if (row.target_tokens.empty()) {
          ++ds.skipped_missing_label;
          continue;
        }
        break;
      }
    }
    ds.rows.push_back(std::move(row));
  }
  return ds;
}

void SplitSpec::validate() const {
  if (!train_ids.empty() || !valid_ids.empty() || !test_ids.empty()) return;
  const double sum = train_fraction + valid_fraction + test_fraction;
  if (std::abs(sum - 1.0) > 1e-9) throw DataError("split: fractions must sum to 1");
  if (train_fraction < 0 || valid_fraction < 0 || test_fraction < 0) throw DataError("split: negative fraction");
}

SplitResult split_dataset(const std::vector<CommitRecord>& records, const SplitSpec& spec) {
  spec.validate();
  SplitResult out;

  if (!spec.train_ids.empty() || !spec.valid_ids.empty() || !spec.test_ids.empty()) {
    for (const CommitRecord& r : records) {
      if (spec.train_ids.count(r.id) > 0) {
        out.train.push_back(r);
      } else if (spec.valid_ids.count(r.id) > 0) {
        out.valid.push_back(r);
      } else if (spec.test_ids.count(r.id) > 0) {
        out.test.push_back(r);
      } else {
        throw DataError("split: record " + r.id + " is not assigned by the explicit id lists");
      }
    }
    return out;
  }

  if (spec.mode == SplitMode::ByTimestamp) {
    std::map<std::string, std::vector<const CommitRecord*>> per_project;
    for (const CommitRecord& r : records) {
      if (!r.timestamp) throw DataError("split: record " + r.id + " lacks a timestamp (by-timestamp mode)");
      per_project[r.project].push_back(&r);
    }
    for (auto& [project, rs] : per_project) {
      std::sort(rs.begin(), rs.end(), [](const CommitRecord* a, const CommitRecord* b) {
        if (*a->timestamp != *b->timestamp) return *a->timestamp < *b->timestamp;
        return a->id < b->id;
      });
      const std::size_t n = rs.size();
      const std::size_t train_end = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(n)));
      const std::size_t valid_end =
          static_cast<std::size_t>(std::floor((spec.train_fraction + spec.valid_fraction) * static_cast<double>(n)));
      for (std::size_t i = 0; i < n; ++i) {
        if (i < train_end) {
          out.train.push_back(*rs[i]);
        } else if (i < valid_end) {
          out.valid.push_back(*rs[i]);
        } else {
          out.test.push_back(*rs[i]);
        }
      }
    }
    return out;
  }

  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(mix64(spec.seed));
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_below(i));
    std::swap(order[i - 1], order[j]);
  }
  const std::size_t n = records.size();
  const std::size_t train_end = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(n)));
  const std::size_t valid_end =
      static_cast<std::size_t>(std::floor((spec.train_fraction + spec.valid_fraction) * static_cast<double>(n)));
  for (std::size_t i = 0; i < n; ++i) {
    if (i < train_end) {
      out.train.push_back(records[order[i]]);
    } else if (i < valid_end) {
      out.valid.push_back(records[order[i]]);
    } else {
      out.test.push_back(records[order[i]]);
    }
  }
  return out;
}

Vocabulary build_corpus_vocab(const std::vector<CommitRecord>& records, std::uint64_t min_freq) {
  std::vector<std::string> tokens;
  for (const CommitRecord& r : records) {
    Expected<CommitDiff> parsed = parse_unified_diff(r.diff_text);
    if (parsed.ok()) {
      std::vector<std::string> enc = serialize_change_with_message(parsed.value(), r.message);
      tokens.insert(tokens.end(), std::make_move_iterator(enc.begin()), std::make_move_iterator(enc.end()));
    }
    for (const std::optional<std::string>* text : {&r.label_old_comment, &r.label_new_comment, &r.label_review}) {
      if (text->has_value()) {
        std::vector<std::string> t = tokenize(**text);
        tokens.insert(tokens.end(), std::make_move_iterator(t.begin()), std::make_move_iterator(t.end()));
      }
    }
  }
  return Vocabulary::build(tokens, min_freq);
}

// ---------------------------------------------------------------------------
// Pre-training
// ---------------------------------------------------------------------------

PretrainResult pretrain(const std::vector<CommitRecord>& records, const Vocabulary& vocab,
                        const PretrainOptions& options) {
  if (records.empty()) throw DataError("pretrain: empty record set");
  options.train.validate();
  ModelConfig cfg = options.model;
  cfg.vocab_size = vocab.size();
  cfg.validate();

  PretrainResult result;
  result.params = init_params<float>(cfg, options.train.seed);
  Trainer<float> trainer(result.params, options.train);
  SampleGenerator gen(options.sampler, &vocab);

  const int max_steps = options.train.max_steps;
  int step = 0;
  std::uint64_t epoch = 0;
  bool first_batch = true;
  while (step < max_steps) {
    const std::uint64_t epoch_seed =
        options.epoch_reseed ? combine_seed(options.train.seed, epoch) : options.train.seed;
    const std::vector<PretrainSample> samples = build_epoch(records, gen, epoch_seed, options.workers);
    if (samples.empty()) throw DataError("pretrain: no samples could be generated from the corpus");

    for (std::size_t pos = 0; pos < samples.size() && step < max_steps; pos += options.train.batch_size) {
      TaskBatch batch;
      const std::size_t end = std::min(samples.size(), pos + static_cast<std::size_t>(options.train.batch_size));
      for (std::size_t i = pos; i < end; ++i) {
        batch[samples[i].task].push_back(to_task_example(samples[i], vocab, cfg, &result.input_stats));
      }
      std::map<PretrainTask, double> per_task;
      const double loss = trainer.step(batch, &per_task);
      if (first_batch) {
        result.first_epoch_initial_loss = loss;
        first_batch = false;
      }
      for (const auto& [task, task_loss] : per_task) {
        result.trace.push_back(TraceRow{step, task_name(task), task_loss});
      }
      result.trace.push_back(TraceRow{step, "combined", loss});
      ++step;
    }
    ++epoch;
  }
  result.steps_run = step;
  return result;
}

// ---------------------------------------------------------------------------
// Fine-tuning
// ---------------------------------------------------------------------------

namespace {

std::vector<TaskExample> generation_examples(const TaskDataset& ds, const Vocabulary& vocab, const ModelConfig& cfg,
                                             InputStats* stats) {
  std::vector<TaskExample> out;
  out.reserve(ds.rows.size());
  for (const TaskRow& row : ds.rows) {
    TaskExample ex;
    ex.input_ids = clip_input(vocab.encode(row.input_tokens), cfg.max_src_len, stats);
    ex.framed_target = frame_target(vocab.encode(row.target_tokens), cfg.max_tgt_len, stats);
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<std::pair<std::vector<int>, bool>> classification_examples(const TaskDataset& ds, const Vocabulary& vocab,
                                                                       const ModelConfig& cfg, InputStats* stats) {
  std::vector<std::pair<std::vector<int>, bool>> out;
  out.reserve(ds.rows.size());
  for (const TaskRow& row : ds.rows) {
    out.emplace_back(clip_input(vocab.encode(row.input_tokens), cfg.max_src_len, stats), row.label);
  }
  return out;
}

// Primary validation metric (higher is better).
double validation_metric(const ModelParams<float>& params, const Vocabulary& vocab, const TaskDataset& valid) {
  if (valid.rows.empty()) return 0.0;
  const TaskSpec& spec = valid.spec;
  if (spec.kind == TaskKind::Classification) {
    std::vector<bool> preds, labels;
    for (const TaskRow& row : valid.rows) {
      const double p = classify(params, clip_input(vocab.encode(row.input_tokens), params.config.max_src_len));
      preds.push_back(p >= 0.5);
      labels.push_back(row.label);
    }
    return f1_binary(preds, labels);
  }
  double total = 0.0;
  for (const TaskRow& row : valid.rows) {
    const std::vector<int> input = clip_input(vocab.encode(row.input_tokens), params.config.max_src_len);
    const std::vector<std::string> decoded = vocab.decode(greedy_decode(params, input, params.config.max_tgt_len));
    switch (spec.task) {
      case DownstreamTask::CommentUpdate:
        total += gleu(row.source_tokens, decoded, row.target_tokens);
        break;
      default:
        total += bleu_bnorm(decoded, row.target_tokens);
        break;
    }
  }
  return total / static_cast<double>(valid.rows.size());
}

}  // namespace

FinetuneResult finetune(const ModelParams<float>& init, const Vocabulary& vocab, const TaskDataset& train,
                        const TaskDataset& valid, const FinetuneOptions& options) {
  if (train.rows.empty()) throw DataError("finetune: empty training set");
  const TaskSpec& spec = train.spec;

  TrainConfig cfg = options.train;
  if (cfg.learning_rate <= 0.0) {
    cfg.learning_rate = spec.kind == TaskKind::Classification ? 2e-5 : 5e-5;
  }
  cfg.validate();

  FinetuneResult result;
  result.params = init;
  if (cfg.max_steps == 0) {
    result.best_valid_metric = validation_metric(result.params, vocab, valid);
    return result;
  }

  ModelParams<float> work = init;
  Trainer<float> trainer(work, cfg);

  std::vector<TaskExample> gen_rows;
  std::vector<std::pair<std::vector<int>, bool>> cls_rows;
  if (spec.kind == TaskKind::Generation) {
    gen_rows = generation_examples(train, vocab, work.config, &result.input_stats);
  } else {
    cls_rows = classification_examples(train, vocab, work.config, &result.input_stats);
  }
  const std::size_t n = spec.kind == TaskKind::Generation ? gen_rows.size() : cls_rows.size();

  Rng shuffle_rng(mix64(cfg.seed ^ 0x0f1e2d3cULL));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  double best_metric = -1.0;
  int evals_since_best = 0;
  std::size_t cursor = n;  // trigger reshuffle at step 0

  for (int step = 0; step < cfg.max_steps; ++step) {
    if (cursor >= n) {
      for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(shuffle_rng.uniform_below(i));
        std::swap(order[i - 1], order[j]);
      }
      cursor = 0;
    }
    const std::size_t end = std::min(n, cursor + static_cast<std::size_t>(cfg.batch_size));
    double loss = 0.0;
    if (spec.kind == TaskKind::Generation) {
      std::vector<TaskExample> batch;
      for (std::size_t i = cursor; i < end; ++i) batch.push_back(gen_rows[order[i]]);
      loss = trainer.step_examples(batch);
    } else {
      std::vector<std::pair<std::vector<int>, bool>> batch;
      for (std::size_t i = cursor; i < end; ++i) batch.push_back(cls_rows[order[i]]);
      loss = trainer.step_classify(batch);
    }
    cursor = end;
    result.trace.push_back(TraceRow{step, downstream_task_name(spec.task), loss});
    result.steps_run = step + 1;

    const bool last_step = step + 1 == cfg.max_steps;
    if ((step + 1) % options.eval_interval == 0 || last_step) {
      const double metric = valid.rows.empty() ? -loss : validation_metric(work, vocab, valid);
      if (metric > best_metric) {
        best_metric = metric;
        result.params = work;  // best-validation checkpoint
        evals_since_best = 0;
      } else {
        ++evals_since_best;
        if (evals_since_best >= options.patience) break;
      }
    }
  }
  result.best_valid_metric = best_metric;
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

EvalResult evaluate_task(const ModelParams<float>& params, const Vocabulary& vocab, const TaskDataset& test) {
  if (test.rows.empty()) throw DataError("evaluate: empty test set");
  EvalResult out;
  const TaskSpec& spec = test.spec;
  for (const TaskRow& row : test.rows) out.example_ids.push_back(row.record_id);

  if (spec.kind == TaskKind::Classification) {
    std::vector<bool> preds, labels;
    for (const TaskRow& row : test.rows) {
      const double p = classify(params, clip_input(vocab.encode(row.input_tokens), params.config.max_src_len));
      out.probabilities.push_back(p);
      preds.push_back(p >= 0.5);
      labels.push_back(row.label);
    }
    out.reports.push_back(MetricReport::corpus_level("f1", f1_binary(preds, labels), test.rows.size()));
    const bool has_pos = std::find(labels.begin(), labels.end(), true) != labels.end();
    const bool has_neg = std::find(labels.begin(), labels.end(), false) != labels.end();
    if (has_pos && has_neg) {
      out.reports.push_back(MetricReport::corpus_level("auc", auc(out.probabilities, labels), test.rows.size()));
    }
    MetricReport probs = MetricReport::corpus_level("probability", 0.0, test.rows.size());
    probs.per_example = out.probabilities;
    out.reports.push_back(std::move(probs));
    return out;
  }

  std::vector<double> primary_scores;
  std::vector<TokenSeq> hyps, refs;
  for (const TaskRow& row : test.rows) {
    const std::vector<int> input = clip_input(vocab.encode(row.input_tokens), params.config.max_src_len);
    std::vector<std::string> decoded = vocab.decode(greedy_decode(params, input, params.config.max_tgt_len));
    switch (spec.task) {
      case DownstreamTask::CommentUpdate:
        primary_scores.push_back(gleu(row.source_tokens, decoded, row.target_tokens));
        break;
      default:
        primary_scores.push_back(bleu_bnorm(decoded, row.target_tokens));
        break;
    }
    hyps.push_back(decoded);
    refs.push_back(row.target_tokens);
    out.decoded.push_back(std::move(decoded));
  }
  out.reports.push_back(MetricReport::sentence_level(spec.metrics.front(), std::move(primary_scores)));
  if (spec.task == DownstreamTask::CommentUpdate) {
    out.reports.push_back(MetricReport::corpus_level("accuracy", exact_match_accuracy(hyps, refs), test.rows.size()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

namespace {

AblationVariant run_variant(const std::string& name, const std::vector<CommitRecord>& records,
                            const Vocabulary& vocab, const AblationOptions& options,
                            const std::vector<PretrainTask>& tasks) {
  PretrainOptions pre = options.pretrain;
  pre.sampler.enabled_tasks = tasks;
  const PretrainResult pretrained = pretrain(records, vocab, pre);

  SplitResult split = split_dataset(records, options.split);
  const TaskDataset train_ds = build_task_dataset(split.train, options.downstream);
  const TaskDataset valid_ds = build_task_dataset(split.valid, options.downstream);
  const TaskDataset test_ds = build_task_dataset(split.test, options.downstream);

  const FinetuneResult tuned = finetune(pretrained.params, vocab, train_ds, valid_ds, options.finetune);
  const EvalResult eval = evaluate_task(tuned.params, vocab, test_ds);

  AblationVariant v;
  v.name = name;
  for (const MetricReport& r : eval.reports) {
    if (r.metric == "probability") continue;
    v.metrics[r.metric] = r.aggregate;
  }
  return v;
}

}  // namespace

AblationReport run_ablation(const std::vector<CommitRecord>& records, const AblationOptions& options) {
  const Vocabulary vocab = build_corpus_vocab(records);

  std::vector<PretrainTask> all_tasks{std::begin(kAllPretrainTasks), std::end(kAllPretrainTasks)};
  std::vector<PretrainTask> reduced_tasks;
  for (PretrainTask t : all_tasks) {
    if (t != options.excluded) reduced_tasks.push_back(t);
  }

  AblationReport report;
  report.excluded_task = task_name(options.excluded);
  report.downstream_task = downstream_task_name(options.downstream);
  report.full = run_variant("full", records, vocab, options, all_tasks);
  report.reduced = run_variant("minus-" + report.excluded_task, records, vocab, options, reduced_tasks);
  return report;
}

std::string ablation_markdown(const AblationReport& report) {
  std::ostringstream out;
  out << "# Ablation: " << report.downstream_task << " without " << report.excluded_task << "\n\n";
  out << "| metric | " << report.full.name << " | " << report.reduced.name << " |\n";
  out << "|---|---|---|\n";
  for (const auto& [metric, value] : report.full.metrics) {
    out << "| " << metric << " | " << value << " | ";
    auto it = report.reduced.metrics.find(metric);
    if (it != report.reduced.metrics.end()) {
      out << it->second;
    } else {
      out << "n/a";
    }
    out << " |\n";
  }
  return out.str();
}

}  // namespace cct
