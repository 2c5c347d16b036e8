#include <doctest.h>

#include "cct/diff.hpp"
#include "cct/rng.hpp"
#include "support/synthetic.hpp"

using namespace cct;

namespace {

const std::string kFigureDiff =
    "diff --git a/superset/db_engine_specs/gsheets.py b/superset/db_engine_specs/gsheets.py\n"
    "--- a/superset/db_engine_specs/gsheets.py\n"
    "+++ b/superset/db_engine_specs/gsheets.py\n"
    "@@ -25,2 +25,2 @@\n"
    " engine = \"gsheets\"\n"
    "-allows_subqueries = False\n"
    "+allows_subqueries = True\n";

}  // namespace

TEST_SUITE("diff") {
  TEST_CASE("parses the boolean-flip example") {
    const CommitDiff d = parse_unified_diff(kFigureDiff).value();
    REQUIRE(d.size() == 1);
    CHECK(d[0].old_path == "superset/db_engine_specs/gsheets.py");
    REQUIRE(d[0].hunks.size() == 1);
    const DiffHunk& h = d[0].hunks[0];
    CHECK(h.old_start == 25);
    CHECK(h.old_len == 2);
    CHECK(h.new_len == 2);
    REQUIRE(h.lines.size() == 3);
    CHECK(h.lines[0].kind == LineKind::Keep);
    CHECK(h.lines[0].text == "engine = \"gsheets\"");
    CHECK(h.lines[1].kind == LineKind::Del);
    CHECK(h.lines[1].text == "allows_subqueries = False");
    CHECK(h.lines[2].kind == LineKind::Add);
    CHECK(h.lines[2].text == "allows_subqueries = True");
  }

  TEST_CASE("rejects degenerate and unsupported inputs") {
    CHECK(!parse_unified_diff("").ok());
    CHECK(!parse_unified_diff("just some text\nwith no hunks\n").ok());
    CHECK(!parse_unified_diff("diff --git a/x b/x\nBinary files a/x and b/x differ\n").ok());
    CHECK(!parse_unified_diff("diff --git a/x b/x\nold mode 100644\nnew mode 100755\n").ok());

    Expected<CommitDiff> bad_header = parse_unified_diff("--- a/x\n+++ b/x\n@@ -x,y +1,1 @@\n x\n");
    CHECK(!bad_header.ok());
    CHECK(bad_header.error().find("hunk header") != std::string::npos);

    Expected<CommitDiff> short_body = parse_unified_diff("--- a/x\n+++ b/x\n@@ -1,3 +1,3 @@\n only\n");
    CHECK(!short_body.ok());
    CHECK(short_body.error().find("hunk") != std::string::npos);

    Expected<CommitDiff> long_body = parse_unified_diff("--- a/x\n+++ b/x\n@@ -1,1 +1,1 @@\n a\n b\n");
    CHECK(!long_body.ok());
  }

  TEST_CASE("old and new views of the example") {
    const CommitDiff d = parse_unified_diff(kFigureDiff).value();
    const std::vector<std::string> old_lines = old_view(d);
    const std::vector<std::string> new_lines = new_view(d);
    CHECK(old_lines == std::vector<std::string>{"engine = \"gsheets\"", "allows_subqueries = False"});
    CHECK(new_lines == std::vector<std::string>{"engine = \"gsheets\"", "allows_subqueries = True"});
  }

  TEST_CASE("keep-only diff has identical views") {
    const CommitDiff d = parse_unified_diff("--- a/x\n+++ b/x\n@@ -1,2 +1,2 @@\n a\n b\n").value();
    CHECK(old_view(d) == new_view(d));
  }

  TEST_CASE("serialize_change emits the marker encoding") {
    const CommitDiff d = parse_unified_diff(kFigureDiff).value();
    const std::vector<std::string> expected = {
        "[CLS]", "[KEEP]", "engine", "=", "\"", "gsheets", "\"",
        "[DEL]", "allows_subqueries", "=", "False",
        "[ADD]", "allows_subqueries", "=", "True"};
    CHECK(serialize_change(d).tokens == expected);
    CHECK(serialize_change(d).tokens == serialize_change(d).tokens);  // deterministic
  }

  TEST_CASE("single keep line") {
    const CommitDiff d = parse_unified_diff("--- a/x\n+++ b/x\n@@ -1,1 +1,1 @@\n x\n").value();
    CHECK(serialize_change(d).tokens == std::vector<std::string>{"[CLS]", "[KEEP]", "x"});
  }

  TEST_CASE("message segment follows [MSG], case-folded") {
    const CommitDiff d = parse_unified_diff(kFigureDiff).value();
    const std::vector<std::string> toks = serialize_change_with_message(d, "Enable subqueries in gsheetsdb");
    const std::vector<std::string> tail(toks.end() - 5, toks.end());
    CHECK(tail == std::vector<std::string>{"[MSG]", "enable", "subqueries", "in", "gsheetsdb"});

    const std::vector<std::string> empty_msg = serialize_change_with_message(d, "");
    CHECK(empty_msg.back() == "[MSG]");
  }

  TEST_CASE("marker token count equals total line count") {
    Rng rng(23);
    for (int round = 0; round < 50; ++round) {
      const auto old_f = testing::random_file(rng, 10);
      const auto new_f = testing::mutate_file(old_f, rng);
      const auto rendered = testing::render_unified(old_f, new_f, "p.py");
      if (rendered.text.empty()) continue;
      const CommitDiff d = parse_unified_diff(rendered.text).value();
      std::size_t lines = 0;
      for (const CodeDiff& f : d) {
        for (const DiffHunk& h : f.hunks) lines += h.lines.size();
      }
      std::size_t markers = 0;
      for (const std::string& t : serialize_change(d).tokens) {
        if (t == "[ADD]" || t == "[DEL]" || t == "[KEEP]") ++markers;
      }
      CHECK(markers == lines);
    }
  }

  TEST_CASE("round-trips diffs produced by an independent differ") {
    Rng rng(99);
    int checked = 0;
    for (int round = 0; round < 200; ++round) {
      const auto old_f = testing::random_file(rng, 12 + rng.uniform_below(9));
      const auto new_f = testing::mutate_file(old_f, rng, 2 + rng.uniform_below(4));
      const auto rendered = testing::render_unified(old_f, new_f, "src/mod.py");
      if (rendered.text.empty()) continue;
      ++checked;

      const Expected<CommitDiff> parsed = parse_unified_diff(rendered.text);
      REQUIRE_MESSAGE(parsed.ok(), parsed.error());
      const CommitDiff& d = parsed.value();

      // hunk-covered slices reproduce exactly
      std::vector<std::string> expected_old, expected_new;
      for (const auto& [b, e] : rendered.old_ranges) {
        for (std::size_t i = b; i < e; ++i) expected_old.push_back(old_f[i]);
      }
      for (const auto& [b, e] : rendered.new_ranges) {
        for (std::size_t i = b; i < e; ++i) expected_new.push_back(new_f[i]);
      }
      CHECK(old_view(d) == expected_old);
      CHECK(new_view(d) == expected_new);

      // marker grouping reconstructs the hunk line list
      const std::vector<std::string> tokens = serialize_change(d).tokens;
      const std::vector<std::string> body(tokens.begin() + 1, tokens.end());
      CHECK(parse_marker_sequence(body).value() == marker_lines(d));
    }
    CHECK(checked > 150);
  }

  TEST_CASE("multi-file commits concatenate in export order") {
    const std::string two_files =
        "diff --git a/a.py b/a.py\n--- a/a.py\n+++ b/a.py\n@@ -1,1 +1,1 @@\n-x = 1\n+x = 2\n"
        "diff --git a/b.py b/b.py\n--- a/b.py\n+++ b/b.py\n@@ -4,1 +4,1 @@\n y = 3\n";
    const CommitDiff d = parse_unified_diff(two_files).value();
    REQUIRE(d.size() == 2);
    CHECK(d[0].old_path == "a.py");
    CHECK(d[1].old_path == "b.py");
    CHECK(changed_paths(d) == std::vector<std::string>{"a.py", "b.py"});
    const std::vector<std::string> toks = serialize_change(d).tokens;
    CHECK(std::count(toks.begin(), toks.end(), "[CLS]") == 1);
    CHECK(toks.front() == "[CLS]");
  }

  TEST_CASE("token after [MSG] is the first message token") {
    Rng rng(1234);
    for (int round = 0; round < 500; ++round) {
      const CommitRecord r = testing::random_record(rng, "r" + std::to_string(round));
      const CommitDiff d = parse_unified_diff(r.diff_text).value();
      const std::vector<std::string> toks = serialize_change_with_message(d, r.message);
      const auto it = std::find(toks.begin(), toks.end(), "[MSG]");
      REQUIRE(it != toks.end());
      REQUIRE(it + 1 != toks.end());
      CHECK(*(it + 1) == tokenize(r.message, CaseMode::Fold).front());
    }
  }
}
