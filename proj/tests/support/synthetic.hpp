#ifndef CCT_TESTS_SYNTHETIC_HPP
#define CCT_TESTS_SYNTHETIC_HPP

// Test-only helpers: an independent line differ used as the round-trip
// oracle, plus synthetic corpus generators.

#include <algorithm>
#include <string>
#include <vector>

#include "cct/record.hpp"
#include "cct/rng.hpp"

namespace cct::testing {

enum class OpKind { Keep, Del, Add };

struct DiffOp {
  OpKind kind;
  std::string text;
  // 0-based indices into the old/new line lists (meaningful per kind)
  std::size_t old_index = 0;
  std::size_t new_index = 0;
};

// Classic LCS diff over whole lines; independent of the production parser.
inline std::vector<DiffOp> lcs_diff(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  std::vector<std::vector<std::size_t>> lcs(n + 1, std::vector<std::size_t>(m + 1, 0));
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      lcs[i][j] = a[i] == b[j] ? lcs[i + 1][j + 1] + 1 : std::max(lcs[i + 1][j], lcs[i][j + 1]);
    }
  }
  std::vector<DiffOp> ops;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < n && j < m) {
    if (a[i] == b[j]) {
      ops.push_back({OpKind::Keep, a[i], i, j});
      ++i;
      ++j;
    } else if (lcs[i + 1][j] >= lcs[i][j + 1]) {
      ops.push_back({OpKind::Del, a[i], i, 0});
      ++i;
    } else {
      ops.push_back({OpKind::Add, b[j], 0, j});
      ++j;
    }
  }
  while (i < n) {
    ops.push_back({OpKind::Del, a[i], i, 0});
    ++i;
  }
  while (j < m) {
    ops.push_back({OpKind::Add, b[j], 0, j});
    ++j;
  }
  return ops;
}

struct RenderedDiff {
  std::string text;
  // per hunk: [old_begin, old_end) over the old lines (hunk-covered slice)
  std::vector<std::pair<std::size_t, std::size_t>> old_ranges;
  std::vector<std::pair<std::size_t, std::size_t>> new_ranges;
};

// Renders ops as a git-style unified diff with `context` keep lines.
inline RenderedDiff render_unified(const std::vector<std::string>& a, const std::vector<std::string>& b,
                                   const std::string& path, std::size_t context = 3) {
  const std::vector<DiffOp> ops = lcs_diff(a, b);
  RenderedDiff out;

  // hunks = op index ranges around changes, padded by `context` keeps, merged
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  for (std::size_t k = 0; k < ops.size(); ++k) {
    if (ops[k].kind == OpKind::Keep) continue;
    const std::size_t begin = k >= context ? k - context : 0;
    const std::size_t end = std::min(ops.size(), k + context + 1);
    if (!groups.empty() && begin <= groups.back().second) {
      groups.back().second = end;
    } else {
      groups.emplace_back(begin, end);
    }
  }
  if (groups.empty()) return out;  // identical inputs: no diff

  out.text += "diff --git a/" + path + " b/" + path + "\n";
  out.text += "--- a/" + path + "\n";
  out.text += "+++ b/" + path + "\n";
  for (const auto& [gb, ge] : groups) {
    std::size_t old_len = 0;
    std::size_t new_len = 0;
    std::size_t old_begin = a.size();
    std::size_t new_begin = b.size();
    for (std::size_t k = gb; k < ge; ++k) {
      if (ops[k].kind != OpKind::Add) {
        old_begin = std::min(old_begin, ops[k].old_index);
        ++old_len;
      }
      if (ops[k].kind != OpKind::Del) {
        new_begin = std::min(new_begin, ops[k].new_index);
        ++new_len;
      }
    }
    // git convention: zero-length ranges report the preceding line number
    const std::size_t old_start = old_len > 0 ? old_begin + 1 : old_begin;
    const std::size_t new_start = new_len > 0 ? new_begin + 1 : new_begin;
    out.text += "@@ -" + std::to_string(old_start) + "," + std::to_string(old_len) + " +" +
                std::to_string(new_start) + "," + std::to_string(new_len) + " @@\n";
    for (std::size_t k = gb; k < ge; ++k) {
      const char prefix = ops[k].kind == OpKind::Keep ? ' ' : ops[k].kind == OpKind::Del ? '-' : '+';
      out.text += prefix + ops[k].text + "\n";
    }
    out.old_ranges.emplace_back(old_len > 0 ? old_begin : 0, old_len > 0 ? old_begin + old_len : 0);
    out.new_ranges.emplace_back(new_len > 0 ? new_begin : 0, new_len > 0 ? new_begin + new_len : 0);
  }
  return out;
}

// --------------------------------------------------------------------------
// Random sources
// --------------------------------------------------------------------------

inline std::string random_identifier(Rng& rng) {
  static const char* const stems[] = {"count", "total", "value", "result", "index", "size",  "flag",
                                      "buffer", "limit", "offset", "sum",   "name",  "state", "node"};
  std::string s = stems[rng.uniform_below(std::size(stems))];
  if (rng.uniform01() < 0.4) s += std::to_string(rng.uniform_below(10));
  return s;
}

inline std::string random_code_line(Rng& rng) {
  switch (rng.uniform_below(4)) {
    case 0:
      return random_identifier(rng) + " = " + std::to_string(rng.uniform_below(100));
    case 1:
      return random_identifier(rng) + " = " + random_identifier(rng) + " + " + std::to_string(rng.uniform_below(10));
    case 2:
      return "if " + random_identifier(rng) + " > " + std::to_string(rng.uniform_below(10)) + " :";
    default:
      return random_identifier(rng) + " ( " + random_identifier(rng) + " )";
  }
}

inline std::vector<std::string> random_file(Rng& rng, std::size_t lines) {
  std::vector<std::string> out;
  out.reserve(lines);
  for (std::size_t i = 0; i < lines; ++i) out.push_back(random_code_line(rng));
  return out;
}

// Applies a few random line edits, returning the new version.
inline std::vector<std::string> mutate_file(const std::vector<std::string>& file, Rng& rng, std::size_t edits = 3) {
  std::vector<std::string> out = file;
  for (std::size_t e = 0; e < edits; ++e) {
    if (out.empty()) {
      out.push_back(random_code_line(rng));
      continue;
    }
    const std::size_t pos = static_cast<std::size_t>(rng.uniform_below(out.size()));
    switch (rng.uniform_below(3)) {
      case 0:
        out[pos] = random_code_line(rng);
        break;
      case 1:
        out.insert(out.begin() + static_cast<std::ptrdiff_t>(pos), random_code_line(rng));
        break;
      default:
        if (out.size() > 1) out.erase(out.begin() + static_cast<std::ptrdiff_t>(pos));
        break;
    }
  }
  return out;
}

inline std::string random_message(Rng& rng, std::size_t words) {
  static const char* const verbs[] = {"fix", "add", "remove", "update", "refactor", "enable", "disable", "handle"};
  static const char* const nouns[] = {"parser", "cache", "query", "logging", "timeout", "overflow",
                                      "config", "retry", "metrics", "encoding"};
  std::string msg = verbs[rng.uniform_below(std::size(verbs))];
  for (std::size_t i = 1; i < words; ++i) {
    msg += ' ';
    msg += nouns[rng.uniform_below(std::size(nouns))];
  }
  return msg;
}

struct RecordOptions {
  std::size_t file_lines = 8;
  std::size_t edits = 3;
  std::size_t message_words = 5;
  bool with_labels = false;
};

inline CommitRecord random_record(Rng& rng, const std::string& id, const RecordOptions& opt = {}) {
  static const char* const languages[] = {"Python", "Java", "Go", "Ruby", "PHP", "Javascript"};
  CommitRecord r;
  r.id = id;
  r.project = "proj" + std::to_string(rng.uniform_below(7));
  r.language = languages[rng.uniform_below(std::size(languages))];
  r.message = random_message(rng, opt.message_words);

  const std::string path = "src/module" + std::to_string(rng.uniform_below(5)) + "/core.py";
  std::vector<std::string> old_file = random_file(rng, opt.file_lines);
  std::vector<std::string> new_file = mutate_file(old_file, rng, opt.edits);
  while (new_file == old_file) new_file = mutate_file(old_file, rng, opt.edits);
  r.diff_text = render_unified(old_file, new_file, path).text;
  r.timestamp = static_cast<std::int64_t>(1600000000 + rng.uniform_below(100000000));

  if (opt.with_labels) {
    r.label_defective = rng.uniform01() < 0.3;
    r.label_quality = rng.uniform01() < 0.5;
    r.label_old_comment = "returns the " + random_identifier(rng) + " of the input";
    r.label_new_comment = "returns the " + random_identifier(rng) + " of the " + random_identifier(rng);
    r.label_review = "please renameold " + random_identifier(rng);
  }
  return r;
}

inline std::vector<CommitRecord> random_corpus(std::uint64_t seed, std::size_t count, RecordOptions opt = {}) {
  Rng rng(seed);
  std::vector<CommitRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(random_record(rng, "c" + std::to_string(i), opt));
  }
  return out;
}

// The worked example used throughout the suites: a one-hunk change flipping
// a boolean config field, with one context line.
inline CommitRecord figure_record() {
  CommitRecord r;
  r.id = "fig1";
  r.project = "superset";
  r.language = "Python";
  r.message = "Enable subqueries in gsheetsdb";
  r.diff_text =
      "diff --git a/superset/db_engine_specs/gsheets.py b/superset/db_engine_specs/gsheets.py\n"
      "--- a/superset/db_engine_specs/gsheets.py\n"
      "+++ b/superset/db_engine_specs/gsheets.py\n"
      "@@ -25,2 +25,2 @@\n"
      " engine = \"gsheets\"\n"
      "-allows_subqueries = False\n"
      "+allows_subqueries = True\n";
  r.timestamp = 1610000000;
  return r;
}

}  // namespace cct::testing

#endif  // CCT_TESTS_SYNTHETIC_HPP
