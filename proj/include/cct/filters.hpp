#ifndef CCT_FILTERS_HPP
#define CCT_FILTERS_HPP

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cct/record.hpp"

namespace cct {

// Quality filter thresholds. Messages with <= min_message_tokens_exclusive
// tokens are dropped; diffs with more than max_diff_tokens payload tokens
// are dropped.
struct FilterConfig {
  std::uint64_t min_message_tokens_exclusive = 3;
  std::uint64_t max_diff_tokens = 100;
  std::set<std::string> excluded_projects;
  std::vector<std::string> test_path_patterns = default_test_patterns();

  static std::vector<std::string> default_test_patterns();
};

enum class RejectReason { ShortMessage, LongDiff, TestFile, ExcludedProject };

std::string reject_reason_name(RejectReason reason);

struct FilterResult {
  bool keep = true;
  RejectReason reason = RejectReason::ShortMessage;  // meaningful when !keep
};

// Pattern mini-language: "seg:NAME" matches a path segment exactly,
// "stem_prefix:P" / "stem_suffix:S" match the file stem (name without the
// final extension). The default set flags test/tests directories and
// test_* / Test* / *_test / *Test / *.test stems.
bool is_test_file(const std::string& path, const std::vector<std::string>& patterns);

// Rules apply in order: ShortMessage, LongDiff, TestFile, ExcludedProject;
// the first violated rule is reported. Total on parseable records.
FilterResult apply_filters(const CommitRecord& record, const FilterConfig& cfg);

// Per-language corpus statistics; merge is associative and commutative.
struct LanguageStats {
  std::set<std::string> projects;
  std::uint64_t commit_count = 0;
  std::uint64_t byte_size = 0;  // bytes of diff text + message
};

struct CorpusStats {
  std::map<std::string, LanguageStats> per_language;

  void add(const CommitRecord& record);
  void merge(const CorpusStats& other);

  std::uint64_t total_commits() const;
  std::uint64_t total_projects() const;  // sum of per-language distinct counts
  std::uint64_t total_bytes() const;
};

CorpusStats corpus_stats(const std::vector<CommitRecord>& records);

}  // namespace cct

#endif  // CCT_FILTERS_HPP
