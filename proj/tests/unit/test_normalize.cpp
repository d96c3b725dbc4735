#include <doctest.h>

#include <random>

#include "docrl/error.hpp"
#include "docrl/normalize.hpp"

using namespace docrl;
using namespace docrl::normalize;

TEST_CASE("sanitize examples") {
  CHECK(sanitize("```markdown\n# Title\n```").text == "# Title");
  CHECK(sanitize("# Title").text == "# Title");
  CHECK(sanitize("a  \r\nb\n\n\n\nc").text == "a\nb\n\nc");
  CHECK(sanitize("```\nbody\n```\n").text == "body");
  CHECK(sanitize("\n\n  lead").text == "  lead");
  // An inner fence that does not wrap the document stays.
  CHECK(sanitize("text\n```\ncode\n```").text == "text\n```\ncode\n```");
}

TEST_CASE("sanitize reports its steps") {
  const SanitizeResult r = sanitize("```md\nx\n```");
  CHECK(std::find(r.report.transforms_applied.begin(), r.report.transforms_applied.end(),
                  "strip_code_fence") != r.report.transforms_applied.end());
  CHECK(sanitize("clean").report.transforms_applied.empty());
}

TEST_CASE("watermarks") {
  auto r = remove_watermarks("body CONFIDENTIAL body", std::vector<std::string>{"CONFIDENTIAL"});
  CHECK(r.text == "body  body");
  CHECK(r.count == 1);
  r = remove_watermarks("body", std::vector<std::string>{});
  CHECK(r.text == "body");
  CHECK(r.count == 0);
  r = remove_watermarks("WM text WM", std::vector<std::string>{"WM"});
  CHECK(r.text == " text ");
  CHECK(r.count == 2);
  r = remove_watermarks("page 12 of 40 x", std::vector<std::string>{"re:page \\d+ of \\d+"});
  CHECK(r.text == " x");
  CHECK_THROWS_AS(WatermarkPattern("re:(unclosed"), ConfigError);
  CHECK_THROWS_AS(WatermarkPattern("re:a*"), ConfigError);
  CHECK_THROWS_AS(WatermarkPattern(""), ConfigError);
}

TEST_CASE("special pages") {
  auto canon = [](std::string_view raw, double f = kDefaultPageAreaFraction) {
    return canonicalize_special_pages(markup::parse_page(raw), f);
  };
  CHECK(canon("   \n\t ").text.empty());
  CHECK(canon("   \n\t ").report.canonical_case == CanonicalCase::BlankPage);
  CHECK(canon("").report.canonical_case == CanonicalCase::BlankPage);

  const auto full = canon("![image](image_4.png)0,0,1000,1000");
  CHECK(full.text == kStandardPlaceholder);
  CHECK(full.report.canonical_case == CanonicalCase::FullPageImage);
  CHECK(canon("![image](image_1.png)0,0,1000,960").report.canonical_case ==
        CanonicalCase::FullPageImage);
  CHECK(canon("![image](image_1.png)0,0,1000,900").report.canonical_case == CanonicalCase::None);
  CHECK(canon("![image](image_1.png)0,0,1000,900", 0.9).report.canonical_case ==
        CanonicalCase::FullPageImage);

  const auto normal = canon("Normal text page.");
  CHECK(normal.text == "Normal text page.");
  CHECK(normal.report.canonical_case == CanonicalCase::None);
  CHECK_THROWS_AS(canon("x", 0.0), ConfigError);
}

TEST_CASE("loop detection") {
  std::string loop;
  for (int i = 0; i < 2000; ++i) loop += "ab";
  const LoopReport l = detect_loops(loop);
  CHECK(l.flagged);
  CHECK(l.compression_ratio < 0.13);
  CHECK(l.threshold == 0.13);

  std::mt19937 rng(11);
  const std::string b64 = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string random;
  for (int i = 0; i < 2000; ++i) random += b64[rng() % 64];
  const LoopReport r = detect_loops(random);
  CHECK_FALSE(r.flagged);
  CHECK(r.compression_ratio > 0.7);

  const LoopReport s = detect_loops("short short short");
  CHECK_FALSE(s.flagged);
  CHECK_FALSE(s.warnings.empty());

  CHECK_THROWS_AS(detect_loops(loop, 0.0), ConfigError);
  CHECK_THROWS_AS(detect_loops(loop, 1.0), ConfigError);
}

TEST_CASE("appending a verbatim copy never raises the ratio") {
  std::mt19937 rng(3);
  for (int i = 0; i < 100; ++i) {
    std::string t;
    const int n = 200 + static_cast<int>(rng() % 2000);
    for (int k = 0; k < n; ++k) t += static_cast<char>('a' + rng() % 26);
    CHECK(detect_loops(t + t).compression_ratio <= detect_loops(t).compression_ratio);
  }
}

TEST_CASE("dedup") {
  std::vector<CorpusRecord> corpus = {make_record("1", "a", "same"), make_record("2", "b", "same"),
                                      make_record("3", "a", "other")};
  const DedupResult r = dedup(corpus);
  REQUIRE(r.records.size() == 2);
  CHECK(r.records[0].doc_id == "1");
  CHECK(r.stats.kept == 2);
  CHECK(r.stats.dropped == 1);
  CHECK(r.stats.per_source.at("b").dropped == 1);
  CHECK(dedup({}).records.empty());

  // Records that differ only by a stripped watermark collapse.
  const auto w = compile_patterns({"DRAFT"});
  const std::string a = sanitize(remove_watermarks("text DRAFT", w).text).text;
  const std::string b = sanitize(remove_watermarks("text", w).text).text;
  CHECK(dedup({make_record("x", "s", a), make_record("y", "s", b)}).records.size() == 1);
}

TEST_CASE("dedup agrees with pairwise comparison") {
  std::mt19937 rng(5);
  std::vector<CorpusRecord> corpus;
  for (int i = 0; i < 800; ++i) {
    corpus.push_back(make_record(std::to_string(i), "s", std::string(1 + rng() % 3, 'a' + rng() % 5)));
  }
  const DedupResult r = dedup(corpus);
  std::vector<std::string> expected;
  for (const CorpusRecord& c : corpus) {
    bool seen = false;
    for (const std::string& e : expected) seen = seen || e == c.text;
    if (!seen) expected.push_back(c.text);
  }
  REQUIRE(r.records.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) CHECK(r.records[i].text == expected[i]);
}

TEST_CASE("convert_and_validate") {
  const ConversionResult s = convert_and_validate("\\section{Intro}");
  CHECK(s.text == "# Intro");
  CHECK(s.metadata.status == ConversionStatus::Success);

  const ConversionResult sub = convert_and_validate("\\subsection*{Method}\nText");
  CHECK(sub.text == "## Method\nText");

  const ConversionResult clean = convert_and_validate("Plain $x+y$ text.");
  CHECK(clean.text == "Plain $x+y$ text.");
  CHECK(clean.metadata.status == ConversionStatus::Success);
  CHECK(clean.metadata.math_compatible);

  const ConversionResult ref = convert_and_validate("See \\ref{fig:1} for details.");
  CHECK(ref.metadata.status == ConversionStatus::Partial);
  CHECK(ref.metadata.unresolved_references == 1);

  CHECK(convert_and_validate("as shown in Figure ??").metadata.missing_figure_numbering);
  CHECK_FALSE(convert_and_validate("$\\frac{a}{b$").metadata.math_compatible);

  const ConversionResult table = convert_and_validate("| a | b |\n|---|---|\n| 1 | 2 |");
  CHECK(table.text ==
        "<table><thead><tr><th>a</th><th>b</th></tr></thead><tbody><tr><td>1</td><td>2</td>"
        "</tr></tbody></table>");
  CHECK(convert_and_validate(table.text).text == table.text);

  const ConversionResult slow =
      convert_and_validate("\\section{A}", markup::MathAllowlist::katex_default(),
                           std::chrono::milliseconds(0));
  CHECK(slow.metadata.status == ConversionStatus::Timeout);
}

TEST_CASE("normalize_document pipeline") {
  PipelineConfig config;
  config.watermarks = compile_patterns({"CONFIDENTIAL"});
  const DocumentResult r = normalize_document("```markdown\n\\section{A}\nCONFIDENTIAL body\n```", config);
  CHECK(r.text == "# A\n body");
  CHECK(r.report.removed_watermarks == 1);
  CHECK_FALSE(r.loop.flagged);

  CHECK(normalize_document("\n \n", config).text.empty());
  CHECK(normalize_document("![image](image_2.png)0,0,1000,1000", config).text == kStandardPlaceholder);
}
