#ifndef CCT_SAMPLER_HPP
#define CCT_SAMPLER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "cct/diff.hpp"
#include "cct/errors.hpp"
#include "cct/record.hpp"
#include "cct/rng.hpp"
#include "cct/vocab.hpp"

namespace cct {

enum class PretrainTask { Mlm4cc, Mlm4cm, Nl2pl, Pl2nl, Cdg };

inline constexpr PretrainTask kAllPretrainTasks[] = {PretrainTask::Mlm4cc, PretrainTask::Mlm4cm,
                                                     PretrainTask::Nl2pl, PretrainTask::Pl2nl, PretrainTask::Cdg};

std::string task_name(PretrainTask task);                 // "mlm4cc", ...
Expected<PretrainTask> task_from_name(const std::string& name);

struct PretrainSample {
  PretrainTask task = PretrainTask::Mlm4cc;
  std::string record_id;
  std::vector<std::string> input_tokens;   // starts with [CLS]
  std::vector<std::string> target_tokens;  // never empty
  std::uint64_t seed = 0;                  // per-sample derived seed
};

struct SamplerConfig {
  double line_mask_rate = 0.15;   // fraction of diff lines masked (MLM4CC)
  double token_mask_rate = 0.15;  // fraction of message tokens picked (MLM4CM)
  double replace_mask_p = 0.80;
  double replace_random_p = 0.10;
  double keep_p = 0.10;
  std::vector<PretrainTask> enabled_tasks{std::begin(kAllPretrainTasks), std::end(kAllPretrainTasks)};

  void validate() const;  // throws DataError on bad rates
};

// Deterministic sample generation: every sample is a pure function of
// (record, config, seed, task). The per-sample seed is derived from
// (epoch seed, record id, task), so output is independent of worker count
// and record order.
class SampleGenerator {
 public:
  SampleGenerator(SamplerConfig cfg, const Vocabulary* vocab);

  Expected<PretrainSample> make(PretrainTask task, const CommitRecord& record, std::uint64_t sample_seed) const;
  Expected<PretrainSample> make(PretrainTask task, const CommitRecord& record, const CommitDiff& diff,
                                std::uint64_t sample_seed) const;

  // One sample per enabled task (round-robin order), skipping tasks whose
  // preconditions the record fails.
  std::vector<PretrainSample> for_record(const CommitRecord& record, std::uint64_t epoch_seed) const;

  static std::uint64_t sample_seed(std::uint64_t epoch_seed, const std::string& record_id, PretrainTask task);

  const SamplerConfig& config() const { return cfg_; }

 private:
  Expected<PretrainSample> make_mlm4cc(const CommitRecord&, const CommitDiff&, Rng&) const;
  Expected<PretrainSample> make_mlm4cm(const CommitRecord&, const CommitDiff&, Rng&) const;
  Expected<PretrainSample> make_nl2pl(const CommitRecord&, const CommitDiff&) const;
  Expected<PretrainSample> make_pl2nl(const CommitRecord&, const CommitDiff&) const;
  Expected<PretrainSample> make_cdg(const CommitRecord&, const CommitDiff&) const;

  SamplerConfig cfg_;
  const Vocabulary* vocab_;
};

// Samples for every record, record-major with tasks cycling inside each
// record so consecutive samples mix tasks. `workers` splits the record list
// into contiguous chunks; output order does not depend on worker count.
std::vector<PretrainSample> build_epoch(const std::vector<CommitRecord>& records, const SampleGenerator& gen,
                                        std::uint64_t seed, int workers = 1);

// JSONL: {"task","record_id","input","target","seed"} per line.
void write_samples(const std::string& path, const std::vector<PretrainSample>& samples);
std::vector<PretrainSample> read_samples(const std::string& path);

}  // namespace cct

#endif  // CCT_SAMPLER_HPP
