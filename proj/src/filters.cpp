#include "cct/filters.hpp"

#include "cct/diff.hpp"
#include "cct/tokenizer.hpp"

namespace cct {

std::vector<std::string> FilterConfig::default_test_patterns() {
  return {"seg:test",         "seg:tests",        "stem_prefix:test_", "stem_prefix:Test",
          "stem_suffix:_test", "stem_suffix:Test", "stem_suffix:.test"};
}

std::string reject_reason_name(RejectReason reason) {
  switch (reason) {
    case RejectReason::ShortMessage:
      return "ShortMessage";
    case RejectReason::LongDiff:
      return "LongDiff";
    case RejectReason::TestFile:
      return "TestFile";
    case RejectReason::ExcludedProject:
      return "ExcludedProject";
  }
  return "Unknown";
}

namespace {

bool starts_with(const std::string& s, const std::string& p) { return s.compare(0, p.size(), p) == 0; }
bool ends_with(const std::string& s, const std::string& p) {
  return s.size() >= p.size() && s.compare(s.size() - p.size(), p.size(), p) == 0;
}

std::vector<std::string> path_segments(const std::string& path) {
  std::vector<std::string> segs;
  std::size_t pos = 0;
  while (pos <= path.size()) {
    std::size_t slash = path.find('/', pos);
    if (slash == std::string::npos) {
      segs.push_back(path.substr(pos));
      break;
    }
    segs.push_back(path.substr(pos, slash - pos));
    pos = slash + 1;
  }
  return segs;
}

std::string file_stem(const std::string& filename) {
  const std::size_t dot = filename.rfind('.');
  if (dot == std::string::npos || dot == 0) return filename;
  return filename.substr(0, dot);
}

}  // namespace

bool is_test_file(const std::string& path, const std::vector<std::string>& patterns) {
  if (path.empty()) return false;
  const std::vector<std::string> segs = path_segments(path);
  const std::string& filename = segs.back();
  const std::string stem = file_stem(filename);
  for (const std::string& pattern : patterns) {
    if (starts_with(pattern, "seg:")) {
      const std::string name = pattern.substr(4);
      for (const std::string& seg : segs) {
        if (seg == name) return true;
      }
    } else if (starts_with(pattern, "stem_prefix:")) {
      if (starts_with(stem, pattern.substr(12))) return true;
    } else if (starts_with(pattern, "stem_suffix:")) {
      if (ends_with(stem, pattern.substr(12))) return true;
    }
  }
  return false;
}

FilterResult apply_filters(const CommitRecord& record, const FilterConfig& cfg) {
  if (tokenize(record.message).size() <= cfg.min_message_tokens_exclusive) {
    return {false, RejectReason::ShortMessage};
  }

  Expected<CommitDiff> parsed = parse_unified_diff(record.diff_text);
  if (parsed.ok()) {
    const CommitDiff& diff = parsed.value();
    if (diff_payload_token_count(diff) > cfg.max_diff_tokens) {
      return {false, RejectReason::LongDiff};
    }
    std::vector<std::string> paths = changed_paths(diff);
    if (record.old_file) paths.push_back(*record.old_file);
    if (record.new_file) paths.push_back(*record.new_file);
    for (const std::string& p : paths) {
      if (is_test_file(p, cfg.test_path_patterns)) return {false, RejectReason::TestFile};
    }
  }

  if (cfg.excluded_projects.count(record.project) > 0) {
    return {false, RejectReason::ExcludedProject};
  }
  return {true, RejectReason::ShortMessage};
}

void CorpusStats::add(const CommitRecord& record) {
  LanguageStats& ls = per_language[record.language];
  ls.projects.insert(record.project);
  ls.commit_count += 1;
  ls.byte_size += record.diff_text.size() + record.message.size();
}

void CorpusStats::merge(const CorpusStats& other) {
  for (const auto& [lang, ls] : other.per_language) {
    LanguageStats& mine = per_language[lang];
    mine.projects.insert(ls.projects.begin(), ls.projects.end());
    mine.commit_count += ls.commit_count;
    mine.byte_size += ls.byte_size;
  }
}

std::uint64_t CorpusStats::total_commits() const {
  std::uint64_t n = 0;
  for (const auto& [lang, ls] : per_language) n += ls.commit_count;
  return n;
}

std::uint64_t CorpusStats::total_projects() const {
  std::uint64_t n = 0;
  for (const auto& [lang, ls] : per_language) n += ls.projects.size();
  return n;
}

std::uint64_t CorpusStats::total_bytes() const {
  std::uint64_t n = 0;
  for (const auto& [lang, ls] : per_language) n += ls.byte_size;
  return n;
}

CorpusStats corpus_stats(const std::vector<CommitRecord>& records) {
  CorpusStats stats;
  for (const CommitRecord& r : records) stats.add(r);
  return stats;
}

}  // namespace cct
