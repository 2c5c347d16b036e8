#ifndef CCT_RECORD_HPP
#define CCT_RECORD_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cct/errors.hpp"

namespace cct {

// One exported commit: the code change, its message, and optional task labels.
struct CommitRecord {
  std::string id;
  std::string project;
  std::string language;
  std::string message;
  std::string diff_text;
  std::optional<std::string> old_file;
  std::optional<std::string> new_file;
  std::optional<std::int64_t> timestamp;
  std::optional<bool> label_defective;
  std::optional<bool> label_quality;
  std::optional<std::string> label_old_comment;
  std::optional<std::string> label_new_comment;
  std::optional<std::string> label_review;

  bool operator==(const CommitRecord&) const = default;
};

// One JSONL line. Keys: id, project, language, message, diff, and optional
// old_file, new_file, timestamp, labels{defective, quality, old_comment,
// new_comment, review}.
Expected<CommitRecord> parse_commit_record(const std::string& line);

std::string serialize_commit_record(const CommitRecord& record);

// Reads a whole corpus file; throws DataError with the 1-based line number
// of the first malformed record.
std::vector<CommitRecord> read_corpus(const std::string& path);

// Collecting reader: malformed lines are reported, well-formed ones kept.
struct CorpusLineError {
  std::size_t line_no = 0;  // 1-based
  std::string id;           // empty when the id itself was unreadable
  std::string message;
};
struct CorpusLoad {
  std::vector<CommitRecord> records;
  std::vector<CorpusLineError> errors;
};
CorpusLoad read_corpus_lenient(const std::string& path);

void write_corpus(const std::string& path, const std::vector<CommitRecord>& records);

}  // namespace cct

#endif  // CCT_RECORD_HPP
