#ifndef CCT_DIFF_HPP
#define CCT_DIFF_HPP

#include <string>
#include <string_view>
#include <vector>

#include "cct/errors.hpp"
#include "cct/tokenizer.hpp"

namespace cct {

enum class LineKind { Add, Del, Keep };

std::string_view marker_for(LineKind kind);  // [ADD] / [DEL] / [KEEP]

struct DiffLine {
  LineKind kind;
  std::string text;  // payload without the +/-/space prefix
};

// One contiguous change region. old/new lengths follow the @@ header.
struct DiffHunk {
  int old_start = 0;  // 1-based
  int old_len = 0;
  int new_start = 0;
  int new_len = 0;
  std::vector<DiffLine> lines;

  bool operator==(const DiffHunk&) const = default;
};

// Parsed diff of a single file pair.
struct CodeDiff {
  std::string old_path;
  std::string new_path;
  std::vector<DiffHunk> hunks;

  bool operator==(const CodeDiff&) const = default;
};

// A commit may touch several files; file sections keep export order.
using CommitDiff = std::vector<CodeDiff>;

// Accepts the git unified-diff dialect: optional `diff --git`/`---`/`+++`
// preamble, `@@ -a,b +c,d @@` headers, body lines prefixed '+', '-' or space.
// Binary patches and mode-change-only sections are rejected with a distinct
// message. A diff with zero hunks is an error (empty change).
Expected<CommitDiff> parse_unified_diff(std::string_view text);

// Single-file convenience; errors if the text holds more than one file.
Expected<CodeDiff> parse_file_diff(std::string_view text);

// Del+Keep lines in order / Add+Keep lines in order.
std::vector<std::string> old_view(const CodeDiff& diff);
std::vector<std::string> new_view(const CodeDiff& diff);
std::vector<std::string> old_view(const CommitDiff& diff);
std::vector<std::string> new_view(const CommitDiff& diff);

// Marker-token encoding: [CLS], then per line a [ADD]/[DEL]/[KEEP] marker
// followed by the line's code tokens. Hunk headers are not emitted.
struct ChangeEncoding {
  std::vector<std::string> tokens;
};

ChangeEncoding serialize_change(const CodeDiff& diff);
ChangeEncoding serialize_change(const CommitDiff& diff);

// serialize_change ++ [MSG] ++ message tokens (case-folded).
std::vector<std::string> serialize_change_with_message(const CommitDiff& diff, std::string_view message);

// All file paths named by the diff (a/ b/ prefixes already stripped).
std::vector<std::string> changed_paths(const CommitDiff& diff);

// Token count of hunk payload lines only; markers and headers excluded.
// This is the count the corpus size filter applies to.
std::size_t diff_payload_token_count(const CommitDiff& diff);

// Inverse of serialize_change up to hunk boundaries: groups a marker-prefixed
// token sequence (no leading [CLS]) back into (kind, code tokens) lines.
struct MarkerLine {
  LineKind kind;
  std::vector<std::string> tokens;

  bool operator==(const MarkerLine&) const = default;
};
Expected<std::vector<MarkerLine>> parse_marker_sequence(const std::vector<std::string>& tokens);

// Flattened (kind, tokenized payload) view of a parsed diff; the shape
// parse_marker_sequence reconstructs.
std::vector<MarkerLine> marker_lines(const CommitDiff& diff);

}  // namespace cct

#endif  // CCT_DIFF_HPP
