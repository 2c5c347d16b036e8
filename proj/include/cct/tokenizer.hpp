#ifndef CCT_TOKENIZER_HPP
#define CCT_TOKENIZER_HPP

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace cct {

// Marker and control tokens. Vocabulary ids 0..11 follow this order.
namespace tok {
inline constexpr std::string_view kCls = "[CLS]";
inline constexpr std::string_view kMsg = "[MSG]";
inline constexpr std::string_view kSep = "[SEP]";
inline constexpr std::string_view kEdge = "[EDGE]";
inline constexpr std::string_view kAdd = "[ADD]";
inline constexpr std::string_view kDel = "[DEL]";
inline constexpr std::string_view kKeep = "[KEEP]";
inline constexpr std::string_view kMask = "[MASK]";
inline constexpr std::string_view kPad = "[PAD]";
inline constexpr std::string_view kUnk = "[UNK]";
inline constexpr std::string_view kBos = "[BOS]";
inline constexpr std::string_view kEos = "[EOS]";
}  // namespace tok

inline constexpr std::array<std::string_view, 12> kSpecialTokens = {
    tok::kCls, tok::kMsg,  tok::kSep, tok::kEdge, tok::kAdd, tok::kDel,
    tok::kKeep, tok::kMask, tok::kPad, tok::kUnk,  tok::kBos, tok::kEos};

bool is_special_token(std::string_view t);

enum class CaseMode { Preserve, Fold };

// Deterministic tokenizer: split on whitespace, then split runs of
// non-alphanumeric, non-underscore characters into single-character tokens.
// Special tokens pass through atomically (and are never case-folded).
std::vector<std::string> tokenize(std::string_view text, CaseMode mode = CaseMode::Preserve);

// Tokenization that records the whitespace between tokens so the original
// text can be rebuilt byte-for-byte (Preserve mode, no special tokens).
// gaps[i] is the whitespace before tokens[i]; gaps.back() trails the text.
struct TokenizedText {
  std::vector<std::string> tokens;
  std::vector<std::string> gaps;  // size() == tokens.size() + 1
};

TokenizedText tokenize_with_map(std::string_view text);
std::string detokenize(const TokenizedText& tt);

}  // namespace cct

#endif  // CCT_TOKENIZER_HPP
