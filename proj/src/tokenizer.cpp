#include "cct/tokenizer.hpp"

#include <cctype>

namespace cct {

namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c) || c == '_'; }
bool is_space_char(unsigned char c) { return std::isspace(c); }

// Length of the special token starting at text[pos], or 0.
std::size_t special_at(std::string_view text, std::size_t pos) {
  for (std::string_view sp : kSpecialTokens) {
    if (text.compare(pos, sp.size(), sp) == 0) return sp.size();
  }
  return 0;
}

std::string fold(std::string_view t) {
  std::string out(t);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

template <class Emit>
void scan(std::string_view text, Emit&& emit) {
  std::size_t i = 0;
  const std::size_t n = text.size();
  std::size_t gap_start = 0;
  while (i < n) {
    if (is_space_char(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    std::size_t len;
    if ((len = special_at(text, i)) > 0) {
      i += len;
      emit(text.substr(start, len), text.substr(gap_start, start - gap_start), true);
    } else if (is_word_char(static_cast<unsigned char>(text[i]))) {
      while (i < n && is_word_char(static_cast<unsigned char>(text[i])) && special_at(text, i) == 0) ++i;
      emit(text.substr(start, i - start), text.substr(gap_start, start - gap_start), false);
    } else {
      ++i;  // punctuation: one character, one token
      emit(text.substr(start, 1), text.substr(gap_start, start - gap_start), false);
    }
    gap_start = i;
  }
  emit(std::string_view{}, text.substr(gap_start), false);  // trailing gap
}

}  // namespace

bool is_special_token(std::string_view t) {
  for (std::string_view sp : kSpecialTokens) {
    if (t == sp) return true;
  }
  return false;
}

std::vector<std::string> tokenize(std::string_view text, CaseMode mode) {
  std::vector<std::string> out;
  scan(text, [&](std::string_view t, std::string_view, bool special) {
    if (t.empty()) return;
    if (!special && mode == CaseMode::Fold) {
      out.push_back(fold(t));
    } else {
      out.emplace_back(t);
    }
  });
  return out;
}

TokenizedText tokenize_with_map(std::string_view text) {
  TokenizedText tt;
  scan(text, [&](std::string_view t, std::string_view gap, bool) {
    tt.gaps.emplace_back(gap);
    if (!t.empty()) tt.tokens.emplace_back(t);
  });
  return tt;
}

std::string detokenize(const TokenizedText& tt) {
  std::string out;
  for (std::size_t i = 0; i < tt.tokens.size(); ++i) {
    out += tt.gaps[i];
    out += tt.tokens[i];
  }
  out += tt.gaps.back();
  return out;
}

}  // namespace cct
