#include "cct/sampler.hpp"

#include <cmath>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "cct/dataflow.hpp"
#include "cct/tokenizer.hpp"

namespace cct {

namespace {

using Json = nlohmann::ordered_json;

Expected<PretrainSample> failure(std::string msg) { return Expected<PretrainSample>::failure(std::move(msg)); }

std::size_t ceil_fraction(double rate, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(rate * static_cast<double>(n)));
}

// Rebuilds the change-plus-message encoding with the selected diff lines
// collapsed to a single [MASK] each (markers stay visible).
std::vector<std::string> encode_with_masked_lines(const std::vector<MarkerLine>& lines,
                                                  const std::vector<std::size_t>& masked,
                                                  const std::vector<std::string>* message_tokens) {
  std::vector<bool> is_masked(lines.size(), false);
  for (std::size_t i : masked) is_masked[i] = true;
  std::vector<std::string> out;
  out.emplace_back(tok::kCls);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    out.emplace_back(marker_for(lines[i].kind));
    if (is_masked[i]) {
      out.emplace_back(tok::kMask);
    } else {
      out.insert(out.end(), lines[i].tokens.begin(), lines[i].tokens.end());
    }
  }
  if (message_tokens != nullptr) {
    out.emplace_back(tok::kMsg);
    out.insert(out.end(), message_tokens->begin(), message_tokens->end());
  }
  return out;
}

std::vector<std::string> masked_line_targets(const std::vector<MarkerLine>& lines,
                                             const std::vector<std::size_t>& masked) {
  std::vector<std::string> target;
  for (std::size_t i : masked) {
    target.emplace_back(marker_for(lines[i].kind));
    target.insert(target.end(), lines[i].tokens.begin(), lines[i].tokens.end());
  }
  return target;
}

}  // namespace

std::string task_name(PretrainTask task) {
  switch (task) {
    case PretrainTask::Mlm4cc:
      return "mlm4cc";
    case PretrainTask::Mlm4cm:
      return "mlm4cm";
    case PretrainTask::Nl2pl:
      return "nl2pl";
    case PretrainTask::Pl2nl:
      return "pl2nl";
    case PretrainTask::Cdg:
      return "cdg";
  }
  return "unknown";
}

Expected<PretrainTask> task_from_name(const std::string& name) {
  for (PretrainTask t : kAllPretrainTasks) {
    if (task_name(t) == name) return t;
  }
  return Expected<PretrainTask>::failure("unknown pre-training task: " + name);
}

void SamplerConfig::validate() const {
  const double sum = replace_mask_p + replace_random_p + keep_p;
  if (std::abs(sum - 1.0) > 1e-9) throw DataError("sampler: replace probabilities must sum to 1.0");
  if (line_mask_rate <= 0.0 || line_mask_rate >= 1.0) throw DataError("sampler: line_mask_rate must be in (0,1)");
  if (token_mask_rate <= 0.0 || token_mask_rate >= 1.0) throw DataError("sampler: token_mask_rate must be in (0,1)");
}

SampleGenerator::SampleGenerator(SamplerConfig cfg, const Vocabulary* vocab) : cfg_(std::move(cfg)), vocab_(vocab) {
  cfg_.validate();
}

std::uint64_t SampleGenerator::sample_seed(std::uint64_t epoch_seed, const std::string& record_id, PretrainTask task) {
  return combine_seed(combine_seed(epoch_seed, hash_str(record_id)), hash_str(task_name(task)));
}

Expected<PretrainSample> SampleGenerator::make(PretrainTask task, const CommitRecord& record,
                                               std::uint64_t seed) const {
  Expected<CommitDiff> diff = parse_unified_diff(record.diff_text);
  if (!diff.ok()) return failure("diff does not parse: " + diff.error());
  return make(task, record, diff.value(), seed);
}

Expected<PretrainSample> SampleGenerator::make(PretrainTask task, const CommitRecord& record, const CommitDiff& diff,
                                               std::uint64_t seed) const {
  Rng rng(seed);
  Expected<PretrainSample> result = [&]() {
    switch (task) {
      case PretrainTask::Mlm4cc:
        return make_mlm4cc(record, diff, rng);
      case PretrainTask::Mlm4cm:
        return make_mlm4cm(record, diff, rng);
      case PretrainTask::Nl2pl:
        return make_nl2pl(record, diff);
      case PretrainTask::Pl2nl:
        return make_pl2nl(record, diff);
      case PretrainTask::Cdg:
        return make_cdg(record, diff);
    }
    return failure("unknown task");
  }();
  if (result.ok()) {
    PretrainSample s = std::move(result).value();
    s.task = task;
    s.record_id = record.id;
    s.seed = seed;
    return s;
  }
  return result;
}

Expected<PretrainSample> SampleGenerator::make_mlm4cc(const CommitRecord& record, const CommitDiff& diff,
                                                      Rng& rng) const {
  const std::vector<MarkerLine> lines = marker_lines(diff);
  if (lines.empty()) return failure("mlm4cc: record has no diff lines");
  const std::size_t n_mask = ceil_fraction(cfg_.line_mask_rate, lines.size());
  const std::vector<std::size_t> selected = rng.sample_without_replacement(lines.size(), n_mask);
  const std::vector<std::string> message_tokens = tokenize(record.message, CaseMode::Fold);

  PretrainSample s;
  s.input_tokens = encode_with_masked_lines(lines, selected, &message_tokens);
  s.target_tokens = masked_line_targets(lines, selected);
  return s;
}

Expected<PretrainSample> SampleGenerator::make_mlm4cm(const CommitRecord& record, const CommitDiff& diff,
                                                      Rng& rng) const {
  std::vector<std::string> message_tokens = tokenize(record.message, CaseMode::Fold);
  if (message_tokens.empty()) return failure("mlm4cm: record has an empty message");
  const std::size_t n_pick = ceil_fraction(cfg_.token_mask_rate, message_tokens.size());
  const std::vector<std::size_t> selected = rng.sample_without_replacement(message_tokens.size(), n_pick);

  PretrainSample s;
  s.target_tokens.reserve(n_pick);
  for (std::size_t pos : selected) s.target_tokens.push_back(message_tokens[pos]);

  // 80/10/10: [MASK], a random non-special vocabulary token, or unchanged.
  const int non_special = vocab_ == nullptr ? 0 : vocab_->size() - kNumSpecialIds;
  for (std::size_t pos : selected) {
    const double u = rng.uniform01();
    if (u < cfg_.replace_mask_p) {
      message_tokens[pos] = tok::kMask;
    } else if (u < cfg_.replace_mask_p + cfg_.replace_random_p && non_special > 0) {
      const int id = kNumSpecialIds + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(non_special)));
      message_tokens[pos] = vocab_->token(id);
    }  // else: keep unchanged
  }

  s.input_tokens = encode_with_masked_lines(marker_lines(diff), {}, &message_tokens);
  return s;
}

Expected<PretrainSample> SampleGenerator::make_nl2pl(const CommitRecord& record, const CommitDiff& diff) const {
  const std::vector<MarkerLine> lines = marker_lines(diff);
  std::vector<std::size_t> added;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].kind == LineKind::Add) added.push_back(i);
  }
  if (added.empty()) return failure("nl2pl: diff has no added lines");
  const std::vector<std::string> message_tokens = tokenize(record.message, CaseMode::Fold);

  PretrainSample s;
  s.input_tokens = encode_with_masked_lines(lines, added, &message_tokens);
  s.target_tokens = masked_line_targets(lines, added);
  return s;
}

Expected<PretrainSample> SampleGenerator::make_pl2nl(const CommitRecord& record, const CommitDiff& diff) const {
  std::vector<std::string> message_tokens = tokenize(record.message, CaseMode::Fold);
  if (message_tokens.empty()) return failure("pl2nl: record has an empty message");

  PretrainSample s;
  s.input_tokens = serialize_change(diff).tokens;
  s.target_tokens = std::move(message_tokens);
  return s;
}

Expected<PretrainSample> SampleGenerator::make_cdg(const CommitRecord& record, const CommitDiff& diff) const {
  (void)record;
  const std::vector<std::string> old_lines = old_view(diff);
  const std::vector<std::string> new_lines = new_view(diff);
  const DataFlowGraph old_df = extract_dataflow(old_lines);
  const DataFlowGraph new_df = extract_dataflow(new_lines);

  PretrainSample s;
  s.input_tokens = build_cdg_input(old_lines, old_df, new_df);
  std::vector<std::string> enc = serialize_change(diff).tokens;
  s.target_tokens.assign(enc.begin() + 1, enc.end());  // drop [CLS]
  if (s.target_tokens.empty()) return failure("cdg: empty change encoding");
  return s;
}

std::vector<PretrainSample> SampleGenerator::for_record(const CommitRecord& record, std::uint64_t epoch_seed) const {
  std::vector<PretrainSample> out;
  Expected<CommitDiff> diff = parse_unified_diff(record.diff_text);
  if (!diff.ok()) return out;
  for (PretrainTask task : cfg_.enabled_tasks) {
    Expected<PretrainSample> s = make(task, record, diff.value(), sample_seed(epoch_seed, record.id, task));
    if (s.ok()) out.push_back(std::move(s).value());
  }
  return out;
}

std::vector<PretrainSample> build_epoch(const std::vector<CommitRecord>& records, const SampleGenerator& gen,
                                        std::uint64_t seed, int workers) {
  if (workers < 1) workers = 1;
  if (workers == 1 || records.size() < 2) {
    std::vector<PretrainSample> out;
    for (const CommitRecord& r : records) {
      std::vector<PretrainSample> part = gen.for_record(r, seed);
      out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return out;
  }

  const std::size_t n = records.size();
  const std::size_t chunk = (n + static_cast<std::size_t>(workers) - 1) / static_cast<std::size_t>(workers);
  std::vector<std::vector<PretrainSample>> parts(static_cast<std::size_t>(workers));
  std::vector<std::thread> threads;
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&, w]() {
      const std::size_t begin = static_cast<std::size_t>(w) * chunk;
      const std::size_t end = std::min(n, begin + chunk);
      for (std::size_t i = begin; i < end; ++i) {
        std::vector<PretrainSample> part = gen.for_record(records[i], seed);
        auto& sink = parts[static_cast<std::size_t>(w)];
        sink.insert(sink.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
      }
    });
  }
  for (std::thread& t : threads) t.join();

  std::vector<PretrainSample> out;
  for (auto& part : parts) {
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

void write_samples(const std::string& path, const std::vector<PretrainSample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write sample file: " + path);
  for (const PretrainSample& s : samples) {
    Json j;
    j["task"] = task_name(s.task);
    j["record_id"] = s.record_id;
    j["input"] = s.input_tokens;
    j["target"] = s.target_tokens;
    j["seed"] = s.seed;
    out << j.dump() << '\n';
  }
}

std::vector<PretrainSample> read_samples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read sample file: " + path);
  std::vector<PretrainSample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": invalid sample JSON");
    }
    PretrainSample s;
    s.task = task_from_name(j.at("task").get<std::string>()).value();
    s.record_id = j.at("record_id").get<std::string>();
    s.input_tokens = j.at("input").get<std::vector<std::string>>();
    s.target_tokens = j.at("target").get<std::vector<std::string>>();
    s.seed = j.at("seed").get<std::uint64_t>();
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace cct
