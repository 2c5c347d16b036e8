#include "cct/nngen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "cct/diff.hpp"
#include "cct/metrics.hpp"

namespace cct {

namespace {
using Json = nlohmann::ordered_json;

double vector_norm(const BowVector& v) {
  double s = 0.0;
  for (const auto& [id, c] : v) s += c * c;
  return std::sqrt(s);
}
}  // namespace

std::vector<std::string> BowIndex::diff_code_tokens(const std::string& diff_text) {
  Expected<CommitDiff> parsed = parse_unified_diff(diff_text);
  if (!parsed.ok()) return {};
  std::vector<std::string> tokens;
  for (const MarkerLine& line : marker_lines(parsed.value())) {
    tokens.insert(tokens.end(), line.tokens.begin(), line.tokens.end());
  }
  return tokens;
}

BowVector BowIndex::bow_of(const std::vector<std::string>& code_tokens, const Vocabulary& vocab) {
  std::map<int, double> counts;
  for (const std::string& t : code_tokens) counts[vocab.id(t)] += 1.0;
  return BowVector(counts.begin(), counts.end());
}

double BowIndex::cosine(const BowVector& a, double norm_a, const BowVector& b, double norm_b) {
  if (norm_a == 0.0 || norm_b == 0.0) return 0.0;
  double dot = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first == b[j].first) {
      dot += a[i].second * b[j].second;
      ++i;
      ++j;
    } else if (a[i].first < b[j].first) {
      ++i;
    } else {
      ++j;
    }
  }
  return dot / (norm_a * norm_b);
}

BowIndex BowIndex::build(const std::vector<CommitRecord>& train_records, const Vocabulary& vocab) {
  BowIndex index;
  index.vocab_ = &vocab;
  for (const CommitRecord& r : train_records) {
    Entry e;
    e.record_id = r.id;
    e.message = r.message;
    e.diff_tokens = diff_code_tokens(r.diff_text);
    e.vector = bow_of(e.diff_tokens, vocab);
    e.norm = vector_norm(e.vector);
    if (e.norm == 0.0) {
      ++index.skipped_empty_;
      continue;
    }
    index.entries_.push_back(std::move(e));
  }
  return index;
}

std::string BowIndex::retrieve(const std::string& test_diff_text, int k) const {
  return retrieve_tokens(diff_code_tokens(test_diff_text), k);
}

std::string BowIndex::retrieve_tokens(const std::vector<std::string>& query_code_tokens, int k) const {
  if (entries_.empty()) throw DataError("nngen: retrieval over an empty index");
  if (k < 1) k = 1;
  const BowVector query = bow_of(query_code_tokens, *vocab_);
  const double query_norm = vector_norm(query);

  // (similarity desc, record_id asc)
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    scored.emplace_back(cosine(query, query_norm, entries_[i].vector, entries_[i].norm), i);
  }
  std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return entries_[a.second].record_id < entries_[b.second].record_id;
  });

  if (k == 1) return entries_[scored.front().second].message;

  const std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(k), scored.size());
  std::size_t best = scored.front().second;
  double best_bleu = -1.0;
  for (std::size_t c = 0; c < top; ++c) {
    const Entry& e = entries_[scored[c].second];
    const double b = query_code_tokens.empty() ? 0.0 : bleu_bnorm(e.diff_tokens, query_code_tokens);
    if (b > best_bleu) {
      best_bleu = b;
      best = scored[c].second;
    }
  }
  return entries_[best].message;
}

void BowIndex::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("nngen: cannot write index: " + path);
  for (const Entry& e : entries_) {
    Json j;
    j["record_id"] = e.record_id;
    j["message"] = e.message;
    j["diff_tokens"] = e.diff_tokens;
    out << j.dump() << '\n';
  }
}

BowIndex BowIndex::load(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("nngen: cannot read index: " + path);
  BowIndex index;
  index.vocab_ = &vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) throw DataError("nngen: invalid index line");
    Entry e;
    e.record_id = j.at("record_id").get<std::string>();
    e.message = j.at("message").get<std::string>();
    e.diff_tokens = j.at("diff_tokens").get<std::vector<std::string>>();
    e.vector = bow_of(e.diff_tokens, vocab);
    e.norm = vector_norm(e.vector);
    if (e.norm == 0.0) {
      ++index.skipped_empty_;
      continue;
    }
    index.entries_.push_back(std::move(e));
  }
  return index;
}

}  // namespace cct
