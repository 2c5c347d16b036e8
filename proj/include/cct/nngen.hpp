#ifndef CCT_NNGEN_HPP
#define CCT_NNGEN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "cct/record.hpp"
#include "cct/vocab.hpp"

namespace cct {

// Sparse token-count vector, sorted by token id.
using BowVector = std::vector<std::pair<int, double>>;

// Bag-of-words index over training diffs; nearest neighbour by cosine
// similarity returns the stored commit message.
class BowIndex {
 public:
  struct Entry {
    std::string record_id;
    std::string message;
    BowVector vector;  // counts over code tokens (markers and [CLS] excluded)
    double norm = 0.0;
    std::vector<std::string> diff_tokens;  // kept for optional BLEU re-ranking
  };

  // Records whose diffs yield an empty token bag are skipped and counted.
  static BowIndex build(const std::vector<CommitRecord>& train_records, const Vocabulary& vocab);

  // k = 1: message of the max-cosine entry, ties to the lowest record_id.
  // k > 1: among the top-k cosine candidates, the one whose diff tokens give
  // the best smoothed BLEU against the query diff tokens.
  std::string retrieve(const std::string& test_diff_text, int k = 1) const;

  // Retrieval over an already-tokenized query (code tokens, markers excluded).
  std::string retrieve_tokens(const std::vector<std::string>& query_code_tokens, int k = 1) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t skipped_empty() const { return skipped_empty_; }
  const std::vector<Entry>& entries() const { return entries_; }

  void save(const std::string& path) const;  // JSONL sidecar
  static BowIndex load(const std::string& path, const Vocabulary& vocab);

  static BowVector bow_of(const std::vector<std::string>& code_tokens, const Vocabulary& vocab);
  static std::vector<std::string> diff_code_tokens(const std::string& diff_text);  // empty if unparseable
  static double cosine(const BowVector& a, double norm_a, const BowVector& b, double norm_b);

 private:
  std::vector<Entry> entries_;
  const Vocabulary* vocab_ = nullptr;
  std::size_t skipped_empty_ = 0;
};

}  // namespace cct

#endif  // CCT_NNGEN_HPP
