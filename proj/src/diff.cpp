#include "cct/diff.hpp"

#include <charconv>

namespace cct {

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      if (pos < text.size()) lines.push_back(text.substr(pos));
      break;
    }
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return lines;
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

// Strips the conventional a/ b/ prefix; "/dev/null" becomes empty.
std::string normalize_path(std::string_view p) {
  if (p == "/dev/null") return {};
  if (starts_with(p, "a/") || starts_with(p, "b/")) p.remove_prefix(2);
  return std::string(p);
}

std::string_view first_field(std::string_view s) {
  const std::size_t cut = s.find('\t');
  return cut == std::string_view::npos ? s : s.substr(0, cut);
}

bool parse_int(std::string_view s, int& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

// `@@ -a[,b] +c[,d] @@ ...`; omitted lengths default to 1.
bool parse_hunk_header(std::string_view line, DiffHunk& hunk) {
  if (!starts_with(line, "@@ -")) return false;
  const std::size_t close = line.find(" @@", 4);
  if (close == std::string_view::npos) return false;
  std::string_view ranges = line.substr(4, close - 4);
  const std::size_t space = ranges.find(" +");
  if (space == std::string_view::npos) return false;
  std::string_view old_part = ranges.substr(0, space);
  std::string_view new_part = ranges.substr(space + 2);

  auto parse_range = [](std::string_view part, int& start, int& len) {
    const std::size_t comma = part.find(',');
    if (comma == std::string_view::npos) {
      len = 1;
      return parse_int(part, start);
    }
    return parse_int(part.substr(0, comma), start) && parse_int(part.substr(comma + 1), len);
  };
  return parse_range(old_part, hunk.old_start, hunk.old_len) && parse_range(new_part, hunk.new_start, hunk.new_len);
}

// Stateful single-pass parser over the line stream.
class DiffParser {
 public:
  Expected<CommitDiff> run(std::string_view text) {
    for (std::string_view line : split_lines(text)) {
      if (!step(line)) return Expected<CommitDiff>::failure(error_);
    }
    if (!flush_file()) return Expected<CommitDiff>::failure(error_);
    if (files_.empty()) return Expected<CommitDiff>::failure("empty change: no hunks found");
    return std::move(files_);
  }

 private:
  bool hunk_incomplete() const { return in_hunk_ && (old_rem_ > 0 || new_rem_ > 0); }

  std::string hunk_name() const {
    std::string where = current_.new_path.empty() ? current_.old_path : current_.new_path;
    if (where.empty()) where = "<unnamed file>";
    return "hunk " + std::to_string(current_.hunks.size()) + " of " + where;
  }

  bool fail(std::string msg) {
    error_ = std::move(msg);
    return false;
  }

  bool body_line(std::string_view line) {
    DiffHunk& h = current_.hunks.back();
    if (line.empty()) {
      // context line whose leading space was stripped in transit
      --old_rem_;
      --new_rem_;
      h.lines.push_back(DiffLine{LineKind::Keep, std::string()});
    } else if (line[0] == '+') {
      --new_rem_;
      h.lines.push_back(DiffLine{LineKind::Add, std::string(line.substr(1))});
    } else if (line[0] == '-') {
      --old_rem_;
      h.lines.push_back(DiffLine{LineKind::Del, std::string(line.substr(1))});
    } else if (line[0] == ' ') {
      --old_rem_;
      --new_rem_;
      h.lines.push_back(DiffLine{LineKind::Keep, std::string(line.substr(1))});
    } else if (starts_with(line, "\\")) {
      return true;  // "\ No newline at end of file"
    } else {
      return fail("unexpected line inside " + hunk_name() + ": " + std::string(line));
    }
    if (old_rem_ < 0 || new_rem_ < 0) {
      return fail("inconsistent lengths in " + hunk_name() + ": body exceeds the header ranges");
    }
    return true;
  }

  bool close_hunk_if_open() {
    if (!in_hunk_) return true;
    if (old_rem_ != 0 || new_rem_ != 0) {
      return fail("inconsistent lengths in " + hunk_name() + ": body shorter than the header ranges");
    }
    if (current_.hunks.back().lines.empty()) return fail("empty " + hunk_name());
    in_hunk_ = false;
    return true;
  }

  bool flush_file() {
    if (!close_hunk_if_open()) return false;
    if (!have_file_) return true;
    if (current_.hunks.empty()) {
      return fail("file section without hunks (mode-change-only or metadata-only diff): " +
                  (current_.old_path.empty() ? current_.new_path : current_.old_path));
    }
    for (std::size_t i = 1; i < current_.hunks.size(); ++i) {
      const DiffHunk& prev = current_.hunks[i - 1];
      const DiffHunk& cur = current_.hunks[i];
      if (cur.old_start < prev.old_start + prev.old_len) {
        return fail("hunks out of order or overlapping at hunk " + std::to_string(i + 1) + " of " +
                    (current_.new_path.empty() ? current_.old_path : current_.new_path));
      }
    }
    files_.push_back(std::move(current_));
    current_ = CodeDiff{};
    have_file_ = false;
    return true;
  }

  bool step(std::string_view line) {
    if (hunk_incomplete()) return body_line(line);

    if (starts_with(line, "diff --git ")) {
      if (!flush_file()) return false;
      have_file_ = true;
      std::string_view rest = line.substr(11);
      const std::size_t mid = rest.find(" b/");
      if (mid != std::string_view::npos) {
        current_.old_path = normalize_path(rest.substr(0, mid));
        current_.new_path = normalize_path(rest.substr(mid + 1));
      }
      return true;
    }
    if (starts_with(line, "Binary files ") || starts_with(line, "GIT binary patch")) {
      return fail("binary patch not supported");
    }
    if (starts_with(line, "--- ")) {
      // a new file section may start here when there is no `diff --git` line
      if (have_file_ && !current_.hunks.empty()) {
        if (!flush_file()) return false;
      }
      have_file_ = true;
      current_.old_path = normalize_path(first_field(line.substr(4)));
      return true;
    }
    if (starts_with(line, "+++ ")) {
      have_file_ = true;
      current_.new_path = normalize_path(first_field(line.substr(4)));
      return true;
    }
    if (starts_with(line, "@@")) {
      if (!close_hunk_if_open()) return false;
      have_file_ = true;
      DiffHunk h;
      if (!parse_hunk_header(line, h)) return fail("malformed hunk header: " + std::string(line));
      if (h.old_len == 0 && h.new_len == 0) {
        return fail("empty hunk (zero-length ranges): " + std::string(line));
      }
      old_rem_ = h.old_len;
      new_rem_ = h.new_len;
      current_.hunks.push_back(std::move(h));
      in_hunk_ = true;
      return true;
    }
    if (starts_with(line, "\\")) return true;
    if (!line.empty() && (line[0] == '+' || line[0] == '-' || line[0] == ' ')) {
      if (in_hunk_ || !current_.hunks.empty()) {
        return fail("inconsistent lengths: change line outside the declared ranges: " + std::string(line));
      }
      return fail("change line before any hunk header: " + std::string(line));
    }
    return true;  // metadata (index, mode, rename, blank separators, ...)
  }

  CommitDiff files_;
  CodeDiff current_;
  bool have_file_ = false;
  bool in_hunk_ = false;
  int old_rem_ = 0;
  int new_rem_ = 0;
  std::string error_;
};

}  // namespace

std::string_view marker_for(LineKind kind) {
  switch (kind) {
    case LineKind::Add:
      return tok::kAdd;
    case LineKind::Del:
      return tok::kDel;
    case LineKind::Keep:
      return tok::kKeep;
  }
  return tok::kKeep;
}

Expected<CommitDiff> parse_unified_diff(std::string_view text) { return DiffParser{}.run(text); }

Expected<CodeDiff> parse_file_diff(std::string_view text) {
  Expected<CommitDiff> parsed = parse_unified_diff(text);
  if (!parsed.ok()) return Expected<CodeDiff>::failure(parsed.error());
  const CommitDiff& files = parsed.value();
  if (files.size() != 1) {
    return Expected<CodeDiff>::failure("expected a single-file diff, found " + std::to_string(files.size()) + " files");
  }
  return files.front();
}

std::vector<std::string> old_view(const CodeDiff& diff) {
  std::vector<std::string> lines;
  for (const DiffHunk& h : diff.hunks) {
    for (const DiffLine& l : h.lines) {
      if (l.kind != LineKind::Add) lines.push_back(l.text);
    }
  }
  return lines;
}

std::vector<std::string> new_view(const CodeDiff& diff) {
  std::vector<std::string> lines;
  for (const DiffHunk& h : diff.hunks) {
    for (const DiffLine& l : h.lines) {
      if (l.kind != LineKind::Del) lines.push_back(l.text);
    }
  }
  return lines;
}

std::vector<std::string> old_view(const CommitDiff& diff) {
  std::vector<std::string> lines;
  for (const CodeDiff& f : diff) {
    std::vector<std::string> part = old_view(f);
    lines.insert(lines.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return lines;
}

std::vector<std::string> new_view(const CommitDiff& diff) {
  std::vector<std::string> lines;
  for (const CodeDiff& f : diff) {
    std::vector<std::string> part = new_view(f);
    lines.insert(lines.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return lines;
}

namespace {
void serialize_into(const CodeDiff& diff, std::vector<std::string>& out) {
  for (const DiffHunk& h : diff.hunks) {
    for (const DiffLine& l : h.lines) {
      out.emplace_back(marker_for(l.kind));
      std::vector<std::string> code = tokenize(l.text);
      out.insert(out.end(), std::make_move_iterator(code.begin()), std::make_move_iterator(code.end()));
    }
  }
}
}  // namespace

ChangeEncoding serialize_change(const CodeDiff& diff) {
  ChangeEncoding enc;
  enc.tokens.emplace_back(tok::kCls);
  serialize_into(diff, enc.tokens);
  return enc;
}

ChangeEncoding serialize_change(const CommitDiff& diff) {
  ChangeEncoding enc;
  enc.tokens.emplace_back(tok::kCls);
  for (const CodeDiff& f : diff) serialize_into(f, enc.tokens);
  return enc;
}

std::vector<std::string> serialize_change_with_message(const CommitDiff& diff, std::string_view message) {
  std::vector<std::string> tokens = serialize_change(diff).tokens;
  tokens.emplace_back(tok::kMsg);
  std::vector<std::string> msg = tokenize(message, CaseMode::Fold);
  tokens.insert(tokens.end(), std::make_move_iterator(msg.begin()), std::make_move_iterator(msg.end()));
  return tokens;
}

std::vector<std::string> changed_paths(const CommitDiff& diff) {
  std::vector<std::string> paths;
  for (const CodeDiff& f : diff) {
    if (!f.old_path.empty()) paths.push_back(f.old_path);
    if (!f.new_path.empty() && f.new_path != f.old_path) paths.push_back(f.new_path);
  }
  return paths;
}

std::size_t diff_payload_token_count(const CommitDiff& diff) {
  std::size_t count = 0;
  for (const CodeDiff& f : diff) {
    for (const DiffHunk& h : f.hunks) {
      for (const DiffLine& l : h.lines) count += tokenize(l.text).size();
    }
  }
  return count;
}

Expected<std::vector<MarkerLine>> parse_marker_sequence(const std::vector<std::string>& tokens) {
  std::vector<MarkerLine> lines;
  for (const std::string& t : tokens) {
    if (t == tok::kAdd || t == tok::kDel || t == tok::kKeep) {
      const LineKind kind = t == tok::kAdd ? LineKind::Add : t == tok::kDel ? LineKind::Del : LineKind::Keep;
      lines.push_back(MarkerLine{kind, {}});
    } else {
      if (lines.empty()) {
        return Expected<std::vector<MarkerLine>>::failure("token before first line marker: " + t);
      }
      lines.back().tokens.push_back(t);
    }
  }
  return lines;
}

std::vector<MarkerLine> marker_lines(const CommitDiff& diff) {
  std::vector<MarkerLine> lines;
  for (const CodeDiff& f : diff) {
    for (const DiffHunk& h : f.hunks) {
      for (const DiffLine& l : h.lines) lines.push_back(MarkerLine{l.kind, tokenize(l.text)});
    }
  }
  return lines;
}

}  // namespace cct
