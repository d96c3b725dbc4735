#pragma once

// Canonical transcription format: markdown text with math spans, HTML
// tables, markdown headings and image placeholders that may carry a
// normalized bounding box suffix, e.g. `![image](image_3.png)120,80,640,400`.

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "docrl/bbox.hpp"

namespace docrl::markup {

struct ImageRef {
  int id = 1;
  std::optional<BBox> bbox;

  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

struct Text {
  std::string text;
  friend bool operator==(const Text&, const Text&) = default;
};
struct InlineMath {
  std::string tex;
  friend bool operator==(const InlineMath&, const InlineMath&) = default;
};
struct DisplayMath {
  std::string tex;
  friend bool operator==(const DisplayMath&, const DisplayMath&) = default;
};
struct Image {
  ImageRef ref;
  friend bool operator==(const Image&, const Image&) = default;
};
struct HtmlTable {
  std::string html;
  friend bool operator==(const HtmlTable&, const HtmlTable&) = default;
};
struct Heading {
  int level = 1;
  std::string text;
  friend bool operator==(const Heading&, const Heading&) = default;
};

using Segment = std::variant<Text, InlineMath, DisplayMath, Image, HtmlTable, Heading>;

/// Structured parse diagnostic. `category` is a stable machine-readable key.
struct ParseWarning {
  std::size_t offset = 0;
  std::string category;
  std::string message;

  friend bool operator==(const ParseWarning&, const ParseWarning&) = default;
};

namespace warning {
inline constexpr std::string_view kBboxArity = "bbox_arity";
inline constexpr std::string_view kBboxNonInteger = "bbox_non_integer";
inline constexpr std::string_view kBboxOutOfRange = "bbox_out_of_range";
inline constexpr std::string_view kBboxInverted = "bbox_inverted";
inline constexpr std::string_view kBboxDegenerate = "bbox_degenerate";
inline constexpr std::string_view kBadImageId = "bad_image_id";
inline constexpr std::string_view kDuplicateImageId = "duplicate_image_id";
inline constexpr std::string_view kUnbalancedMath = "unbalanced_math_delimiter";
inline constexpr std::string_view kUnclosedTable = "unclosed_table";
}  // namespace warning

struct PageOutput {
  std::string raw;
  std::vector<Segment> segments;
  /// Byte offset in `raw` where each segment starts (parallel to segments;
  /// empty for pages assembled by hand).
  std::vector<std::size_t> offsets;
  bool terminated_with_eos = false;
  std::vector<ParseWarning> warnings;
};

/// Total parser: malformed constructs degrade to Text plus a warning.
PageOutput parse_page(std::string_view raw, bool eos_seen = true);

/// Builds a page from segments; `raw` is their serialization.
PageOutput make_page(std::vector<Segment> segments, bool eos_seen = true);

std::string serialize_segments(const std::vector<Segment>& segments);
std::string serialize_page(const PageOutput& page);
std::string serialize_image(const ImageRef& ref);

/// Segments whose serialization reparses to themselves. Text must be
/// non-empty, math non-empty without its own delimiters, no two Text
/// segments adjacent, and text following an image must not start with a
/// bbox-suffix character.
bool is_canonical(const std::vector<Segment>& segments);

enum class MathKind { Inline, Display };

struct MathSpan {
  std::string tex;
  MathKind kind = MathKind::Inline;

  friend bool operator==(const MathSpan&, const MathSpan&) = default;
};

std::vector<MathSpan> extract_math_spans(const PageOutput& page);

// ---------------------------------------------------------------------------
// Math validation

/// Commands (without backslash) and environment names a renderer accepts.
struct MathAllowlist {
  std::set<std::string, std::less<>> commands;
  std::set<std::string, std::less<>> environments;

  /// Built-in approximation of the commonly supported KaTeX surface.
  static MathAllowlist katex_default();
  /// One entry per line, `#` starts a comment. `\name` or `name` adds a
  /// command, `env:name` adds an environment.
  static MathAllowlist parse(std::string_view text);
  static MathAllowlist load(const std::string& path);

  /// Union with another list (in place).
  void merge(const MathAllowlist& other);
};

namespace math_issue {
inline constexpr std::string_view kUnbalancedBrace = "unbalanced brace";
inline constexpr std::string_view kEnvMismatch = "environment mismatch";
inline constexpr std::string_view kUnclosedEnv = "unclosed environment";
inline constexpr std::string_view kUnexpectedEnd = "unexpected \\end";
inline constexpr std::string_view kUnknownEnv = "unknown environment";
inline constexpr std::string_view kUnpairedLeft = "unpaired \\left";
inline constexpr std::string_view kUnpairedRight = "unpaired \\right";
inline constexpr std::string_view kUnknownCommand = "unknown command";
inline constexpr std::string_view kHtmlTag = "html tag";
}  // namespace math_issue

struct MathIssue {
  std::string kind;  // one of math_issue::*
  std::string detail;
  std::size_t offset = 0;
};

struct ValidationResult {
  bool valid = true;
  std::vector<MathIssue> issues;

  bool has(std::string_view kind) const;
};

ValidationResult validate_math(std::string_view span, const MathAllowlist& allowlist);

/// True when the span contains something that looks like an HTML tag.
bool contains_html_tag(std::string_view s);

// ---------------------------------------------------------------------------
// Formatting artifacts

enum class ArtifactCategory {
  HtmlInMath,
  MarkdownItalicVariable,
  UnbalancedDelimiter,
  LatexOutsideMath,
};

std::string_view to_string(ArtifactCategory c);

struct Artifact {
  std::size_t offset = 0;
  ArtifactCategory category{};
  std::string excerpt;
};

std::vector<Artifact> detect_format_artifacts(const PageOutput& page);

}  // namespace docrl::markup
