#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "cct/diff.hpp"
#include "cct/filters.hpp"
#include "cct/record.hpp"
#include "cct/rng.hpp"
#include "support/synthetic.hpp"

using namespace cct;

TEST_SUITE("corpus") {
  TEST_CASE("parses a full record line") {
    const CommitRecord fig = testing::figure_record();
    const Expected<CommitRecord> parsed = parse_commit_record(serialize_commit_record(fig));
    REQUIRE(parsed.ok());
    CHECK(parsed.value().id == "fig1");
    CHECK(parsed.value().message == "Enable subqueries in gsheetsdb");
    CHECK(parsed.value().diff_text == fig.diff_text);
  }

  TEST_CASE("missing required keys fail with the key name") {
    const Expected<CommitRecord> r = parse_commit_record(R"({"id":"c1","project":"p","language":"Py","diff":"x"})");
    CHECK(!r.ok());
    CHECK(r.error().find("message") != std::string::npos);
    CHECK(!parse_commit_record("{not json").ok());
    CHECK(!parse_commit_record(R"({"id":"","project":"p","language":"l","message":"m","diff":"d"})").ok());
  }

  TEST_CASE("records round-trip through serialize-then-parse") {
    Rng rng(42);
    for (int i = 0; i < 100; ++i) {
      testing::RecordOptions opt;
      opt.with_labels = rng.uniform01() < 0.7;
      const CommitRecord r = testing::random_record(rng, "c" + std::to_string(i), opt);
      const Expected<CommitRecord> back = parse_commit_record(serialize_commit_record(r));
      REQUIRE(back.ok());
      CHECK(back.value() == r);
    }
  }

  TEST_CASE("defective label round-trips") {
    CommitRecord r = testing::figure_record();
    r.label_defective = true;
    const CommitRecord back = parse_commit_record(serialize_commit_record(r)).value();
    REQUIRE(back.label_defective.has_value());
    CHECK(*back.label_defective == true);
  }

  TEST_CASE("test-path detection over a hand-built fixture table") {
    const auto patterns = FilterConfig::default_test_patterns();
    const std::vector<std::pair<std::string, bool>> table = {
        {"src/tests/util.py", true},
        {"superset/db_engine_specs/gsheets.py", false},
        {"FooTest.java", true},
        {"test/unit.c", true},
        {"tests/helper.rb", true},
        {"src/test/java/App.java", true},
        {"testing/helper.py", false},
        {"contest/winner.py", false},
        {"src/test_parser.py", true},
        {"src/parser_test.go", true},
        {"lib/TestUtils.java", true},
        {"lib/utils.test.js", true},
        {"lib/utils.js", false},
        {"attest/sign.go", false},
        {"protest/march.py", false},
        {"a/b/c/deep/tests/x.py", true},
        {"latest/news.md", false},
        {"test", true},
        {"src/main.rs", false},
        {"Test.java", true},
        {"mytest.py", false},
        {"my_test.py", true},
        {"docs/testimony.md", false},
        {"src/Testimony.java", true},  // stem prefix rule is intentionally blunt
        {"b/test/x", true},
        {"b/x/test.py", false},
        {"spec/foo_test.rb", true},
        {"spec/foo.rb", false},
        {"src/TEST.java", false},  // patterns are case-sensitive
        {"app/views/tests.py", false}};
    for (const auto& [path, expected] : table) {
      CAPTURE(path);
      CHECK(is_test_file(path, patterns) == expected);
    }
  }

  TEST_CASE("keeps the boolean-flip example") {
    const FilterConfig cfg;
    const FilterResult res = apply_filters(testing::figure_record(), cfg);
    CHECK(res.keep);
  }

  TEST_CASE("rejects messages at the three-token boundary") {
    const FilterConfig cfg;
    CommitRecord r = testing::figure_record();
    r.message = "fix the bug";  // exactly 3 tokens
    const FilterResult res = apply_filters(r, cfg);
    CHECK(!res.keep);
    CHECK(res.reason == RejectReason::ShortMessage);

    r.message = "fix the bad bug";  // 4 tokens
    CHECK(apply_filters(r, cfg).keep);
  }

  TEST_CASE("rejects over-long diffs by payload token count") {
    FilterConfig cfg;
    CommitRecord r = testing::figure_record();
    CHECK(diff_payload_token_count(parse_unified_diff(r.diff_text).value()) == 11);
    cfg.max_diff_tokens = 10;
    const FilterResult res = apply_filters(r, cfg);
    CHECK(!res.keep);
    CHECK(res.reason == RejectReason::LongDiff);
    cfg.max_diff_tokens = 11;  // boundary: <= limit keeps
    CHECK(apply_filters(r, cfg).keep);
  }

  TEST_CASE("rejects changes touching test files") {
    const FilterConfig cfg;
    CommitRecord r = testing::figure_record();
    r.diff_text = "--- a/src/tests/foo\n+++ b/src/tests/foo\n@@ -1,1 +1,1 @@\n-x = 1\n+x = 2\n";
    const FilterResult res = apply_filters(r, cfg);
    CHECK(!res.keep);
    CHECK(res.reason == RejectReason::TestFile);
  }

  TEST_CASE("rejects excluded projects last") {
    FilterConfig cfg;
    cfg.excluded_projects = {"superset"};
    CommitRecord r = testing::figure_record();
    FilterResult res = apply_filters(r, cfg);
    CHECK(!res.keep);
    CHECK(res.reason == RejectReason::ExcludedProject);

    // first violated rule wins: short message beats excluded project
    r.message = "fix";
    res = apply_filters(r, cfg);
    CHECK(res.reason == RejectReason::ShortMessage);

    cfg.max_diff_tokens = 1;
    r.message = "fix the bad bug";
    res = apply_filters(r, cfg);
    CHECK(res.reason == RejectReason::LongDiff);
  }

  TEST_CASE("filtering is idempotent and partitions the corpus") {
    FilterConfig cfg;
    cfg.excluded_projects = {"proj3"};
    const std::vector<CommitRecord> corpus = testing::random_corpus(77, 300);
    std::size_t kept = 0;
    std::size_t rejected = 0;
    for (const CommitRecord& r : corpus) {
      const FilterResult res = apply_filters(r, cfg);
      if (res.keep) {
        ++kept;
        CHECK(apply_filters(r, cfg).keep);            // idempotent
        CHECK(cfg.excluded_projects.count(r.project) == 0);  // leakage guard
      } else {
        ++rejected;
      }
    }
    CHECK(kept + rejected == corpus.size());
    CHECK(kept > 0);
  }

  TEST_CASE("corpus statistics") {
    CHECK(corpus_stats({}).total_commits() == 0);
    CHECK(corpus_stats({}).total_bytes() == 0);

    std::vector<CommitRecord> three;
    for (int i = 0; i < 3; ++i) three.push_back(testing::figure_record());
    three[0].language = "Python";
    three[1].language = "Python";
    three[2].language = "Java";
    const CorpusStats s = corpus_stats(three);
    CHECK(s.per_language.at("Python").commit_count == 2);
    CHECK(s.per_language.at("Java").commit_count == 1);
    CHECK(s.total_commits() == 3);
  }

  TEST_CASE("statistics match an independent recount and merge associatively") {
    const std::vector<CommitRecord> corpus = testing::random_corpus(5, 1000);

    // independent oracle: single pass with plain maps
    std::map<std::string, std::uint64_t> commits, bytes;
    std::map<std::string, std::set<std::string>> projects;
    for (const CommitRecord& r : corpus) {
      commits[r.language] += 1;
      bytes[r.language] += r.diff_text.size() + r.message.size();
      projects[r.language].insert(r.project);
    }

    const CorpusStats whole = corpus_stats(corpus);
    for (const auto& [lang, ls] : whole.per_language) {
      CHECK(ls.commit_count == commits[lang]);
      CHECK(ls.byte_size == bytes[lang]);
      CHECK(ls.projects.size() == projects[lang].size());
    }

    // associative-commutative merge of partial stats
    CorpusStats left = corpus_stats({corpus.begin(), corpus.begin() + 400});
    const CorpusStats right = corpus_stats({corpus.begin() + 400, corpus.end()});
    left.merge(right);
    CHECK(left.total_commits() == whole.total_commits());
    CHECK(left.total_bytes() == whole.total_bytes());
    CHECK(left.total_projects() == whole.total_projects());
  }

  TEST_CASE("lenient reader reports line numbers") {
    const auto tmp = std::filesystem::temp_directory_path() / "cct_corpus_bad.jsonl";
    {
      std::ofstream out(tmp);
      out << serialize_commit_record(testing::figure_record()) << "\n";
      out << "{broken\n";
      out << serialize_commit_record(testing::figure_record()) << "\n";
    }
    const CorpusLoad load = read_corpus_lenient(tmp.string());
    CHECK(load.records.size() == 2);
    REQUIRE(load.errors.size() == 1);
    CHECK(load.errors[0].line_no == 2);
    CHECK_THROWS_AS(read_corpus(tmp.string()), DataError);
  }
}
