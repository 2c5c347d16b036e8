#include "cct/vocab.hpp"

#include <algorithm>
#include <fstream>

#include "cct/errors.hpp"

namespace cct {

Vocabulary::Vocabulary() {
  for (std::string_view sp : kSpecialTokens) add(std::string(sp));
}

void Vocabulary::add(std::string token) {
  const int id = static_cast<int>(id_to_token_.size());
  token_to_id_.emplace(token, id);
  id_to_token_.push_back(std::move(token));
}

Vocabulary Vocabulary::build(const std::vector<std::string>& corpus_tokens, std::uint64_t min_freq) {
  if (min_freq < 1) throw DataError("vocab: min_freq must be >= 1");
  std::unordered_map<std::string, std::uint64_t> freq;
  for (const std::string& t : corpus_tokens) {
    if (is_special_token(t)) continue;  // already present with a fixed id
    ++freq[t];
  }
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  kept.reserve(freq.size());
  for (auto& [t, f] : freq) {
    if (f >= min_freq) kept.emplace_back(t, f);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  for (auto& [t, f] : kept) v.add(t);
  return v;
}

int Vocabulary::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kIdUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return token_to_id_.count(std::string(token)) > 0;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw DataError("vocab: id out of range: " + std::to_string(id));
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const std::string& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> tokens;
  tokens.reserve(ids.size());
  for (int i : ids) tokens.push_back(token(i));
  return tokens;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("vocab: cannot write " + path);
  for (const std::string& t : id_to_token_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("vocab: cannot read " + path);
  Vocabulary v;
  std::string line;
  int id = 0;
  while (std::getline(in, line)) {
    if (id < kNumSpecialIds) {
      if (line != v.id_to_token_[static_cast<std::size_t>(id)]) {
        throw DataError("vocab: special token mismatch at line " + std::to_string(id + 1));
      }
    } else {
      v.add(line);
    }
    ++id;
  }
  if (id < kNumSpecialIds) throw DataError("vocab: file too short: " + path);
  return v;
}

}  // namespace cct
