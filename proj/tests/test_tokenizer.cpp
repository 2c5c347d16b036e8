#include <doctest.h>

#include <cctype>
#include <filesystem>
#include <fstream>

#include "cct/errors.hpp"
#include "cct/rng.hpp"
#include "cct/tokenizer.hpp"
#include "cct/vocab.hpp"

using namespace cct;

namespace {

std::string random_text(Rng& rng, std::size_t len) {
  // printable chars plus whitespace; '[' excluded so no special token forms
  static const std::string alphabet =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_ \t\n=+-*/(){}.,;:'\"<>!";
  std::string s;
  for (std::size_t i = 0; i < len; ++i) s += alphabet[rng.uniform_below(alphabet.size())];
  return s;
}

}  // namespace

TEST_SUITE("tokenizer") {
  TEST_CASE("splits identifiers, operators and punctuation") {
    CHECK(tokenize("allows_subqueries = False") == std::vector<std::string>{"allows_subqueries", "=", "False"});
    CHECK(tokenize("engine = \"gsheets\"") == std::vector<std::string>{"engine", "=", "\"", "gsheets", "\""});
    CHECK(tokenize("a+=b") == std::vector<std::string>{"a", "+", "=", "b"});
  }

  TEST_CASE("empty input yields no tokens") {
    CHECK(tokenize("").empty());
    CHECK(tokenize("   \t\n").empty());
  }

  TEST_CASE("special tokens pass through atomically") {
    CHECK(tokenize("[CLS] [KEEP] x") == std::vector<std::string>{"[CLS]", "[KEEP]", "x"});
    CHECK(tokenize("a[MASK]b") == std::vector<std::string>{"a", "[MASK]", "b"});
    CHECK(tokenize("[CLSx") == std::vector<std::string>{"[", "CLSx"});
  }

  TEST_CASE("case folding spares special tokens") {
    CHECK(tokenize("Enable [MASK] X", CaseMode::Fold) == std::vector<std::string>{"enable", "[MASK]", "x"});
  }

  TEST_CASE("no output token contains whitespace; specials only when verbatim") {
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
      for (const std::string& t : tokenize(random_text(rng, 60))) {
        CHECK(!t.empty());
        for (char c : t) CHECK(!std::isspace(static_cast<unsigned char>(c)));
        CHECK(!is_special_token(t));
      }
    }
  }

  TEST_CASE("whitespace map reproduces the input byte-for-byte") {
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
      const std::string text = random_text(rng, 1 + rng.uniform_below(80));
      CHECK(detokenize(tokenize_with_map(text)) == text);
    }
    CHECK(detokenize(tokenize_with_map("")) == "");
  }

  TEST_CASE("tokenize is pure") {
    const std::string text = "def f(x): return x_1 + 2";
    CHECK(tokenize(text) == tokenize(text));
  }
}

TEST_SUITE("vocab") {
  TEST_CASE("empty corpus keeps exactly the twelve special tokens") {
    const Vocabulary v = Vocabulary::build({}, 1);
    CHECK(v.size() == kNumSpecialIds);
    CHECK(v.id("[CLS]") == 0);
    CHECK(v.id("[MSG]") == 1);
    CHECK(v.id("[EOS]") == 11);
  }

  TEST_CASE("min_freq threshold") {
    const Vocabulary v = Vocabulary::build({"a", "a", "b"}, 2);
    CHECK(v.contains("a"));
    CHECK(!v.contains("b"));
  }

  TEST_CASE("ids ordered by frequency then lexicographically") {
    const Vocabulary v = Vocabulary::build({"z", "z", "m", "a"}, 1);
    CHECK(v.id("z") == kNumSpecialIds);      // most frequent
    CHECK(v.id("a") == kNumSpecialIds + 1);  // tie broken lexicographically
    CHECK(v.id("m") == kNumSpecialIds + 2);
  }

  TEST_CASE("unknown tokens encode as [UNK]") {
    const Vocabulary v = Vocabulary::build({"a"}, 1);
    CHECK(v.encode({"nope"}) == std::vector<int>{kIdUnk});
    CHECK(v.encode({"[CLS]"}) == std::vector<int>{0});
  }

  TEST_CASE("decode is the exact inverse on in-vocabulary input") {
    Rng rng(3);
    std::vector<std::string> corpus;
    for (int i = 0; i < 300; ++i) corpus.push_back("tok" + std::to_string(rng.uniform_below(40)));
    const Vocabulary v = Vocabulary::build(corpus, 1);
    for (int round = 0; round < 1000; ++round) {
      std::vector<std::string> seq;
      for (int i = 0; i < 8; ++i) seq.push_back(v.token(static_cast<int>(rng.uniform_below(v.size()))));
      CHECK(v.decode(v.encode(seq)) == seq);
    }
  }

  TEST_CASE("decode rejects out-of-range ids") {
    const Vocabulary v = Vocabulary::build({}, 1);
    CHECK_THROWS_AS(v.decode({v.size()}), DataError);
    CHECK_THROWS_AS(v.decode({-1}), DataError);
  }

  TEST_CASE("serialized vocabulary is byte-identical across builds") {
    Rng rng(5);
    std::vector<std::string> corpus;
    for (int i = 0; i < 500; ++i) corpus.push_back("w" + std::to_string(rng.uniform_below(60)));
    const auto tmp = std::filesystem::temp_directory_path();
    const std::string p1 = (tmp / "cct_vocab_a.txt").string();
    const std::string p2 = (tmp / "cct_vocab_b.txt").string();
    Vocabulary::build(corpus, 2).save(p1);
    Vocabulary::build(corpus, 2).save(p2);
    std::ifstream f1(p1), f2(p2);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
    CHECK(!s1.empty());

    const Vocabulary loaded = Vocabulary::load(p1);
    CHECK(loaded.size() == Vocabulary::build(corpus, 2).size());
  }
}
