#include "cct/dataflow.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>
#include <unordered_set>

#include "cct/tokenizer.hpp"

namespace cct {

namespace {

const std::unordered_set<std::string>& keyword_set() {
  static const std::unordered_set<std::string> kw = {
      "if",     "else",  "elif",   "while", "for",     "in",     "return", "def",    "function", "var",
      "let",    "const", "true",   "false", "none",    "null",   "nil",    "and",    "or",       "not",
      "new",    "class", "import", "from",  "pass",    "break",  "continue", "lambda", "switch", "case",
      "do",     "try",   "except", "catch", "finally", "raise",  "throw",  "yield",  "global",   "with",
      "as",     "is",    "static", "void",  "public",  "private", "protected"};
  return kw;
}

std::string to_lower(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Token indices lying inside single- or double-quoted spans (line-local,
// escapes ignored). Quote tokens themselves count as inside.
std::vector<bool> string_span_mask(const std::vector<std::string>& toks) {
  std::vector<bool> mask(toks.size(), false);
  char open = 0;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const std::string& t = toks[i];
    if (open == 0) {
      if (t == "\"" || t == "'") {
        open = t[0];
        mask[i] = true;
      }
    } else {
      mask[i] = true;
      if (t.size() == 1 && t[0] == open) open = 0;
    }
  }
  return mask;
}

}  // namespace

bool is_identifier_token(const std::string& token) {
  if (token.empty()) return false;
  const unsigned char first = static_cast<unsigned char>(token[0]);
  if (!std::isalpha(first) && first != '_') return false;
  for (char c : token) {
    const unsigned char uc = static_cast<unsigned char>(c);
    if (!std::isalnum(uc) && uc != '_') return false;
  }
  return !is_special_token(token);
}

bool is_keyword_token(const std::string& token) { return keyword_set().count(to_lower(token)) > 0; }

DataFlowGraph extract_dataflow(const std::vector<std::string>& code_lines) {
  DataFlowGraph graph;
  std::unordered_map<std::string, VarOccurrence> last_def;

  for (std::size_t line = 0; line < code_lines.size(); ++line) {
    const std::vector<std::string> toks = tokenize(code_lines[line]);
    const std::vector<bool> in_string = string_span_mask(toks);

    const bool assignment = toks.size() >= 2 && is_identifier_token(toks[0]) && !is_keyword_token(toks[0]) &&
                            toks[1] == "=" && (toks.size() == 2 || toks[2] != "=");
    const std::size_t expr_start = assignment ? 2 : 0;

    std::vector<VarOccurrence> uses;
    for (std::size_t j = expr_start; j < toks.size(); ++j) {
      if (in_string[j]) continue;
      const std::string& t = toks[j];
      if (!is_identifier_token(t) || is_keyword_token(t)) continue;
      if (j + 1 < toks.size() && toks[j + 1] == "(") continue;  // call name
      uses.push_back(VarOccurrence{t, line, j});
    }

    for (const VarOccurrence& use : uses) {
      auto it = last_def.find(use.name);
      if (it != last_def.end()) graph.edges.push_back({use, it->second});
    }
    if (assignment) {
      const VarOccurrence def{toks[0], line, 0};
      for (const VarOccurrence& use : uses) graph.edges.push_back({use, def});
      last_def[def.name] = def;  // visible from the next line
    }
  }

  std::sort(graph.edges.begin(), graph.edges.end(), [](const DataFlowGraph::Edge& a, const DataFlowGraph::Edge& b) {
    if (a.use.line_index != b.use.line_index) return a.use.line_index < b.use.line_index;
    if (a.use.token_index != b.use.token_index) return a.use.token_index < b.use.token_index;
    if (a.source.line_index != b.source.line_index) return a.source.line_index < b.source.line_index;
    return a.source.token_index < b.source.token_index;
  });
  return graph;
}

std::vector<std::string> serialize_edges(const DataFlowGraph& graph) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    if (i > 0) out.emplace_back(tok::kEdge);
    out.push_back(graph.edges[i].use.name);
    out.push_back(graph.edges[i].source.name);
  }
  return out;
}

std::vector<std::string> build_cdg_input(const std::vector<std::string>& old_code_lines,
                                         const DataFlowGraph& old_df, const DataFlowGraph& new_df) {
  std::vector<std::string> out;
  out.emplace_back(tok::kCls);
  for (const std::string& line : old_code_lines) {
    std::vector<std::string> toks = tokenize(line);
    out.insert(out.end(), std::make_move_iterator(toks.begin()), std::make_move_iterator(toks.end()));
  }
  out.emplace_back(tok::kSep);
  std::vector<std::string> old_edges = serialize_edges(old_df);
  out.insert(out.end(), std::make_move_iterator(old_edges.begin()), std::make_move_iterator(old_edges.end()));
  out.emplace_back(tok::kSep);
  std::vector<std::string> new_edges = serialize_edges(new_df);
  out.insert(out.end(), std::make_move_iterator(new_edges.begin()), std::make_move_iterator(new_edges.end()));
  return out;
}

}  // namespace cct
