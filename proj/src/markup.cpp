#include "docrl/markup.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>

namespace docrl::markup {
namespace {

constexpr std::string_view kImagePrefix = "![image](image_";
constexpr std::string_view kImageSuffix = ".png)";
constexpr std::string_view kTableOpen = "<table";
constexpr std::string_view kTableClose = "</table>";

bool is_digit(char c) { return c >= '0' && c <= '9'; }

/// True when raw[pos] is preceded by an odd number of backslashes.
bool escaped(std::string_view raw, std::size_t pos) {
  std::size_t n = 0;
  while (pos > n && raw[pos - n - 1] == '\\') ++n;
  return n % 2 == 1;
}

/// Finds `delim` at or after `from`, skipping backslash-escaped occurrences.
std::size_t find_unescaped(std::string_view raw, std::string_view delim, std::size_t from) {
  while (true) {
    const std::size_t p = raw.find(delim, from);
    if (p == std::string_view::npos) return p;
    if (!escaped(raw, p)) return p;
    from = p + 1;
  }
}

/// Heading line at `pos`: returns (level, text end) or level 0.
std::pair<int, std::size_t> heading_at(std::string_view raw, std::size_t pos) {
  std::size_t i = pos;
  while (i < raw.size() && raw[i] == '#') ++i;
  const int level = static_cast<int>(i - pos);
  if (level < 1 || level > 6) return {0, 0};
  if (i >= raw.size() || raw[i] != ' ') return {0, 0};
  std::size_t end = raw.find('\n', i + 1);
  if (end == std::string_view::npos) end = raw.size();
  if (end == i + 1) return {0, 0};
  return {level, end};
}

bool is_suffix_char(char c) { return is_digit(c) || c == ',' || c == '.' || c == '-'; }

struct Parser {
  std::string_view raw;
  PageOutput page;
  std::string text;
  std::size_t text_start = 0;
  std::set<int> seen_ids;

  void warn(std::size_t offset, std::string_view category, std::string message) {
    page.warnings.push_back({offset, std::string(category), std::move(message)});
  }

  void append_text(std::size_t at, std::string_view s) {
    if (text.empty()) text_start = at;
    text.append(s);
  }

  void flush_text() {
    if (!text.empty()) {
      page.segments.push_back(Text{std::move(text)});
      page.offsets.push_back(text_start);
      text.clear();
    }
  }

  void push(std::size_t at, Segment seg) {
    flush_text();
    page.segments.push_back(std::move(seg));
    page.offsets.push_back(at);
  }

  /// Tries an image placeholder at `i`; returns the end position or npos.
  std::size_t try_image(std::size_t i) {
    std::size_t j = i + kImagePrefix.size();
    const std::size_t digits_begin = j;
    while (j < raw.size() && is_digit(raw[j])) ++j;
    if (j == digits_begin || raw.substr(j, kImageSuffix.size()) != kImageSuffix) {
      return std::string_view::npos;
    }
    const std::string_view digits = raw.substr(digits_begin, j - digits_begin);
    j += kImageSuffix.size();
    int id = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), id);
    if (ec != std::errc{} || id < 1) {
      warn(i, warning::kBadImageId, "image id must be a positive integer: " + std::string(digits));
      return std::string_view::npos;
    }

    ImageRef ref{id, std::nullopt};
    std::size_t end = j;
    if (j < raw.size() && (is_digit(raw[j]) || raw[j] == '-')) {
      std::size_t k = j;
      while (k < raw.size() && is_suffix_char(raw[k])) ++k;
      // A trailing period ends the sentence, not the suffix.
      while (k > j && raw[k - 1] == '.') --k;
      const std::string_view suffix = raw.substr(j, k - j);
      std::vector<std::string_view> parts;
      std::size_t from = 0;
      while (true) {
        const std::size_t comma = suffix.find(',', from);
        parts.push_back(suffix.substr(from, comma == std::string_view::npos ? suffix.npos
                                                                              : comma - from));
        if (comma == std::string_view::npos) break;
        from = comma + 1;
      }
      if (parts.size() != 4) {
        warn(j, warning::kBboxArity,
             "bbox suffix needs 4 coordinates, got " + std::to_string(parts.size()));
        return std::string_view::npos;
      }
      int v[4] = {0, 0, 0, 0};
      for (std::size_t p = 0; p < 4; ++p) {
        std::string_view part = parts[p];
        const bool negative = !part.empty() && part.front() == '-';
        if (negative) part.remove_prefix(1);
        if (part.empty() || !std::all_of(part.begin(), part.end(), is_digit)) {
          warn(j, warning::kBboxNonInteger, "non-integer coordinate: " + std::string(parts[p]));
          return std::string_view::npos;
        }
        if (negative || part.size() > 7) {
          warn(j, warning::kBboxOutOfRange, "coordinate out of range: " + std::string(parts[p]));
          return std::string_view::npos;
        }
        std::from_chars(part.data(), part.data() + part.size(), v[p]);
        if (v[p] > kCoordMax) {
          warn(j, warning::kBboxOutOfRange, "coordinate out of range: " + std::string(parts[p]));
          return std::string_view::npos;
        }
      }
      const BBox box{v[0], v[1], v[2], v[3]};
      if (box.x1 > box.x2 || box.y1 > box.y2) {
        warn(j, warning::kBboxInverted, "inverted box " + box.to_string());
        return std::string_view::npos;
      }
      if (box.degenerate()) warn(j, warning::kBboxDegenerate, "zero-area box " + box.to_string());
      ref.bbox = box;
      end = k;
    }
    if (!seen_ids.insert(id).second) {
      warn(i, warning::kDuplicateImageId, "image id " + std::to_string(id) + " repeated");
    }
    push(i, Image{ref});
    return end;
  }

  /// Math span starting at `i` with the given delimiters.
  std::size_t try_math(std::size_t i, std::string_view open, std::string_view close,
                       bool display) {
    const std::size_t body = i + open.size();
    std::size_t end = find_unescaped(raw, close, body);
    if (!display && open == "$" && end != std::string_view::npos) {
      // Inline dollars never span a blank line.
      const std::size_t blank = raw.find("\n\n", body);
      if (blank != std::string_view::npos && blank < end) end = std::string_view::npos;
    }
    if (end == std::string_view::npos || end == body) {
      warn(i, warning::kUnbalancedMath, "unbalanced math delimiter " + std::string(open));
      append_text(i, open);
      return i + open.size();
    }
    std::string tex(raw.substr(body, end - body));
    if (display) {
      push(i, DisplayMath{std::move(tex)});
    } else {
      push(i, InlineMath{std::move(tex)});
    }
    return end + close.size();
  }

  void run() {
    std::size_t i = 0;
    while (i < raw.size()) {
      const char c = raw[i];
      const bool line_start = i == 0 || raw[i - 1] == '\n';
      if (c == '#' && line_start) {
        const auto [level, end] = heading_at(raw, i);
        if (level > 0) {
          if (!text.empty() && text.back() == '\n') text.pop_back();
          push(i, Heading{level, std::string(raw.substr(i + level + 1, end - i - level - 1))});
          i = end;
          if (i < raw.size()) ++i;  // the line break belongs to the heading
          continue;
        }
      }
      if (c == '!' && raw.substr(i, kImagePrefix.size()) == kImagePrefix) {
        const std::size_t end = try_image(i);
        if (end != std::string_view::npos) {
          i = end;
          continue;
        }
      }
      if (c == '$' && !escaped(raw, i)) {
        if (raw.substr(i, 2) == "$$") {
          i = try_math(i, "$$", "$$", true);
        } else {
          i = try_math(i, "$", "$", false);
        }
        continue;
      }
      if (c == '\\' && i + 1 < raw.size() && !escaped(raw, i)) {
        if (raw[i + 1] == '(') {
          i = try_math(i, "\\(", "\\)", false);
          continue;
        }
        if (raw[i + 1] == '[') {
          i = try_math(i, "\\[", "\\]", true);
          continue;
        }
      }
      if (c == '<' && raw.substr(i, kTableOpen.size()) == kTableOpen &&
          i + kTableOpen.size() < raw.size() &&
          (raw[i + kTableOpen.size()] == '>' ||
           std::isspace(static_cast<unsigned char>(raw[i + kTableOpen.size()])))) {
        const std::size_t close = raw.find(kTableClose, i);
        if (close == std::string_view::npos) {
          warn(i, warning::kUnclosedTable, "table without </table>");
        } else {
          const std::size_t end = close + kTableClose.size();
          push(i, HtmlTable{std::string(raw.substr(i, end - i))});
          i = end;
          continue;
        }
      }
      append_text(i, raw.substr(i, 1));
      ++i;
    }
    flush_text();
  }
};

template <class... Fs>
struct Overload : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overload(Fs...) -> Overload<Fs...>;

bool line_starts_heading(std::string_view s, std::size_t pos) {
  return heading_at(s, pos).first > 0;
}

}  // namespace

PageOutput parse_page(std::string_view raw, bool eos_seen) {
  Parser p{raw, {}, {}, 0, {}};
  p.page.raw = std::string(raw);
  p.page.terminated_with_eos = eos_seen;
  p.run();
  return std::move(p.page);
}

PageOutput make_page(std::vector<Segment> segments, bool eos_seen) {
  PageOutput page;
  page.raw = serialize_segments(segments);
  page.segments = std::move(segments);
  page.terminated_with_eos = eos_seen;
  return page;
}

std::string serialize_image(const ImageRef& ref) {
  std::string out = "![image](image_" + std::to_string(ref.id) + ".png)";
  if (ref.bbox) out += ref.bbox->to_string();
  return out;
}

std::string serialize_segments(const std::vector<Segment>& segments) {
  std::string out;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Segment& seg = segments[i];
    if (const auto* h = std::get_if<Heading>(&seg)) {
      if (i > 0 && !std::holds_alternative<Heading>(segments[i - 1])) out += '\n';
      out.append(static_cast<std::size_t>(h->level), '#');
      out += ' ';
      out += h->text;
      if (i + 1 < segments.size()) out += '\n';
      continue;
    }
    std::visit(Overload{
                   [&](const Text& t) { out += t.text; },
                   [&](const InlineMath& m) { out += "$" + m.tex + "$"; },
                   [&](const DisplayMath& m) { out += "$$" + m.tex + "$$"; },
                   [&](const Image& im) { out += serialize_image(im.ref); },
                   [&](const HtmlTable& t) { out += t.html; },
                   [&](const Heading&) {},
               },
               seg);
  }
  return out;
}

std::string serialize_page(const PageOutput& page) { return serialize_segments(page.segments); }

bool is_canonical(const std::vector<Segment>& segments) {
  auto bad_text = [](std::string_view s) {
    if (s.empty() || s.back() == '\\') return true;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '$' && !escaped(s, i)) return true;
      if (s[i] == '\\' && i + 1 < s.size() && (s[i + 1] == '(' || s[i + 1] == '[') &&
          !escaped(s, i)) {
        return true;
      }
    }
    return s.find(kImagePrefix) != std::string_view::npos ||
           s.find(kTableOpen) != std::string_view::npos;
  };
  auto odd_trailing_backslashes = [](std::string_view s) {
    std::size_t n = 0;
    while (n < s.size() && s[s.size() - 1 - n] == '\\') ++n;
    return n % 2 == 1;
  };
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Segment& seg = segments[i];
    const Segment* prev = i > 0 ? &segments[i - 1] : nullptr;
    if (const auto* t = std::get_if<Text>(&seg)) {
      if (bad_text(t->text)) return false;
      if (prev && std::holds_alternative<Text>(*prev)) return false;
      if (prev && std::holds_alternative<Image>(*prev) &&
          (is_suffix_char(t->text.front()) || t->text.front() == '+')) {
        return false;
      }
      const bool at_line_start = !prev || std::holds_alternative<Heading>(*prev);
      if (at_line_start && line_starts_heading(t->text, 0)) return false;
      for (std::size_t p = 0; p < t->text.size(); ++p) {
        if (t->text[p] == '\n' && line_starts_heading(t->text, p + 1)) return false;
      }
    } else if (const auto* m = std::get_if<InlineMath>(&seg)) {
      const std::string_view s = m->tex;
      if (s.empty() || s.find("\n\n") != s.npos || odd_trailing_backslashes(s)) return false;
      for (std::size_t p = 0; p < s.size(); ++p) {
        if (s[p] == '$' && !escaped(s, p)) return false;
      }
    } else if (const auto* d = std::get_if<DisplayMath>(&seg)) {
      const std::string_view s = d->tex;
      if (s.empty() || s.front() == '$' || odd_trailing_backslashes(s)) return false;
      if (find_unescaped(s, "$$", 0) != s.npos) return false;
      if (s.back() == '$' && !escaped(s, s.size() - 1)) return false;
    } else if (const auto* im = std::get_if<Image>(&seg)) {
      if (im->ref.id < 1) return false;
      if (im->ref.bbox && !im->ref.bbox->valid()) return false;
    } else if (const auto* tb = std::get_if<HtmlTable>(&seg)) {
      const std::string_view s = tb->html;
      if (s.size() < kTableOpen.size() + 1 + kTableClose.size()) return false;
      if (s.substr(0, kTableOpen.size()) != kTableOpen) return false;
      const char after = s[kTableOpen.size()];
      if (after != '>' && !std::isspace(static_cast<unsigned char>(after))) return false;
      if (s.find(kTableClose) != s.size() - kTableClose.size()) return false;
    } else if (const auto* h = std::get_if<Heading>(&seg)) {
      if (h->level < 1 || h->level > 6 || h->text.empty()) return false;
      if (h->text.find('\n') != std::string::npos) return false;
    }
  }
  return true;
}

std::vector<MathSpan> extract_math_spans(const PageOutput& page) {
  std::vector<MathSpan> spans;
  for (const Segment& seg : page.segments) {
    if (const auto* m = std::get_if<InlineMath>(&seg)) {
      spans.push_back({m->tex, MathKind::Inline});
    } else if (const auto* d = std::get_if<DisplayMath>(&seg)) {
      spans.push_back({d->tex, MathKind::Display});
    }
  }
  return spans;
}

// ---------------------------------------------------------------------------

std::string_view to_string(ArtifactCategory c) {
  switch (c) {
    case ArtifactCategory::HtmlInMath:
      return "html_in_math";
    case ArtifactCategory::MarkdownItalicVariable:
      return "markdown_italic_variable";
    case ArtifactCategory::UnbalancedDelimiter:
      return "unbalanced_delimiter";
    case ArtifactCategory::LatexOutsideMath:
      return "latex_outside_math";
  }
  return "unknown";
}

namespace {

bool is_latin(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_word(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '*'; }

void scan_text_artifacts(std::string_view s, std::size_t base, std::vector<Artifact>& out) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if ((c == '*' || c == '_') && (i == 0 || !is_word(s[i - 1])) && i + 2 < s.size() &&
        is_latin(s[i + 1])) {
      std::size_t j = i + 2;
      while (j < s.size() && is_digit(s[j])) ++j;
      if (j < s.size() && s[j] == c && (j + 1 == s.size() || !is_word(s[j + 1]))) {
        out.push_back({base + i, ArtifactCategory::MarkdownItalicVariable,
                       std::string(s.substr(i, j + 1 - i))});
        i = j;
        continue;
      }
    }
    if (c == '\\' && i + 1 < s.size() && is_latin(s[i + 1]) && !escaped(s, i)) {
      std::size_t j = i + 1;
      while (j < s.size() && is_latin(s[j])) ++j;
      out.push_back({base + i, ArtifactCategory::LatexOutsideMath, std::string(s.substr(i, j - i))});
      i = j - 1;
    }
  }
}

}  // namespace

std::vector<Artifact> detect_format_artifacts(const PageOutput& input) {
  const PageOutput reparsed = input.offsets.size() == input.segments.size()
                                  ? PageOutput{}
                                  : parse_page(serialize_page(input), input.terminated_with_eos);
  const PageOutput& page = input.offsets.size() == input.segments.size() ? input : reparsed;

  std::vector<Artifact> out;
  for (const ParseWarning& w : page.warnings) {
    if (w.category == warning::kUnbalancedMath) {
      out.push_back({w.offset, ArtifactCategory::UnbalancedDelimiter, w.message});
    }
  }
  // Only structural issues matter here; command coverage is math_reward's job.
  static const MathAllowlist structural_only;
  for (std::size_t k = 0; k < page.segments.size(); ++k) {
    const Segment& seg = page.segments[k];
    const std::size_t at = page.offsets[k];
    const std::string* tex = nullptr;
    if (const auto* m = std::get_if<InlineMath>(&seg)) tex = &m->tex;
    if (const auto* d = std::get_if<DisplayMath>(&seg)) tex = &d->tex;
    if (tex) {
      if (contains_html_tag(*tex)) {
        out.push_back({at, ArtifactCategory::HtmlInMath, *tex});
      }
      const ValidationResult v = validate_math(*tex, structural_only);
      for (const MathIssue& issue : v.issues) {
        if (issue.kind == math_issue::kUnbalancedBrace || issue.kind == math_issue::kEnvMismatch ||
            issue.kind == math_issue::kUnclosedEnv || issue.kind == math_issue::kUnexpectedEnd ||
            issue.kind == math_issue::kUnpairedLeft || issue.kind == math_issue::kUnpairedRight) {
          out.push_back({at, ArtifactCategory::UnbalancedDelimiter, issue.kind + ": " + issue.detail});
        }
      }
      continue;
    }
    if (const auto* t = std::get_if<Text>(&seg)) {
      scan_text_artifacts(t->text, at, out);
    } else if (const auto* h = std::get_if<Heading>(&seg)) {
      scan_text_artifacts(h->text, at + static_cast<std::size_t>(h->level) + 1, out);
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Artifact& a, const Artifact& b) { return a.offset < b.offset; });
  return out;
}

}  // namespace docrl::markup
