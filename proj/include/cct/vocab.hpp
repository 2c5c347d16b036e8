#ifndef CCT_VOCAB_HPP
#define CCT_VOCAB_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cct/tokenizer.hpp"

namespace cct {

// Fixed ids of the special tokens (vocabulary ids 0..11).
enum SpecialId : int {
  kIdCls = 0,
  kIdMsg = 1,
  kIdSep = 2,
  kIdEdge = 3,
  kIdAdd = 4,
  kIdDel = 5,
  kIdKeep = 6,
  kIdMask = 7,
  kIdPad = 8,
  kIdUnk = 9,
  kIdBos = 10,
  kIdEos = 11,
};

inline constexpr int kNumSpecialIds = 12;

// Immutable token <-> id map. Ids 0..11 are the special tokens; the rest are
// assigned by descending corpus frequency, ties broken lexicographically.
class Vocabulary {
 public:
  Vocabulary();  // specials only

  static Vocabulary build(const std::vector<std::string>& corpus_tokens, std::uint64_t min_freq);

  int id(std::string_view token) const;  // [UNK] id for out-of-vocabulary
  bool contains(std::string_view token) const;
  const std::string& token(int id) const;  // throws DataError if out of range
  int size() const { return static_cast<int>(id_to_token_.size()); }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  void save(const std::string& path) const;  // one token per line, line = id
  static Vocabulary load(const std::string& path);

 private:
  void add(std::string token);
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

}  // namespace cct

#endif  // CCT_VOCAB_HPP
