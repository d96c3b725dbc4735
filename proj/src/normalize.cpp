#include "docrl/normalize.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <unordered_map>

#include "docrl/error.hpp"

namespace docrl::normalize {

using markup::PageOutput;
using markup::Segment;

std::string_view to_string(CanonicalCase c) {
  switch (c) {
    case CanonicalCase::None:
      return "none";
    case CanonicalCase::FullPageImage:
      return "full_page_image";
    case CanonicalCase::BlankPage:
      return "blank_page";
  }
  return "none";
}

std::string_view to_string(ConversionStatus s) {
  switch (s) {
    case ConversionStatus::Success:
      return "success";
    case ConversionStatus::Partial:
      return "partial";
    case ConversionStatus::Timeout:
      return "timeout";
  }
  return "success";
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool all_space(std::string_view s) { return std::all_of(s.begin(), s.end(), is_space); }

void note(NormalizationReport& r, std::string_view step) {
  if (std::find(r.transforms_applied.begin(), r.transforms_applied.end(), step) ==
      r.transforms_applied.end()) {
    r.transforms_applied.emplace_back(step);
  }
}

std::string normalize_whitespace(std::string_view in, NormalizationReport& report) {
  std::string s;
  s.reserve(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] == '\r' && i + 1 < in.size() && in[i + 1] == '\n') continue;
    s += in[i];
  }
  if (s.size() != in.size()) note(report, "normalize_newlines");

  // Trailing spaces and tabs at the end of every line.
  std::string t;
  t.reserve(s.size());
  std::size_t line_begin = 0;
  while (line_begin <= s.size()) {
    std::size_t nl = s.find('\n', line_begin);
    const bool last = nl == std::string::npos;
    if (last) nl = s.size();
    std::size_t end = nl;
    while (end > line_begin && (s[end - 1] == ' ' || s[end - 1] == '\t')) --end;
    t.append(s, line_begin, end - line_begin);
    if (last) break;
    t += '\n';
    line_begin = nl + 1;
  }
  if (t.size() != s.size()) note(report, "strip_trailing_whitespace");

  // At most one blank line in a row.
  std::string u;
  u.reserve(t.size());
  std::size_t run = 0;
  for (char c : t) {
    run = c == '\n' ? run + 1 : 0;
    if (run <= 2) u += c;
  }
  if (u.size() != t.size()) note(report, "collapse_blank_lines");

  std::size_t b = 0;
  while (b < u.size() && u[b] == '\n') ++b;
  std::size_t e = u.size();
  while (e > b && is_space(u[e - 1])) --e;
  if (b != 0 || e != u.size()) note(report, "trim");
  return u.substr(b, e - b);
}

bool is_fence_line(std::string_view line) { return line.substr(0, 3) == "```"; }

/// Returns the inner text when `s` is wrapped in one balanced code fence.
std::optional<std::string> unwrap_fence(const std::string& s) {
  if (s.size() < 6 || s.compare(0, 3, "```") != 0) return std::nullopt;
  const std::size_t first_nl = s.find('\n');
  if (first_nl == std::string::npos) return std::nullopt;
  const std::string_view tag = std::string_view(s).substr(3, first_nl - 3);
  for (char c : tag) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '+')) {
      return std::nullopt;
    }
  }
  const std::size_t last_nl = s.rfind('\n');
  if (std::string_view(s).substr(last_nl + 1) != "```") return std::nullopt;
  std::string inner =
      last_nl > first_nl ? s.substr(first_nl + 1, last_nl - first_nl - 1) : std::string();
  // Inner fences must pair up, otherwise the outer ticks close a real block.
  std::size_t fences = 0;
  std::size_t pos = 0;
  while (pos <= inner.size()) {
    std::size_t nl = inner.find('\n', pos);
    if (nl == std::string::npos) nl = inner.size();
    if (is_fence_line(std::string_view(inner).substr(pos, nl - pos))) ++fences;
    pos = nl + 1;
  }
  if (fences % 2 != 0) return std::nullopt;
  return inner;
}

}  // namespace

SanitizeResult sanitize(std::string_view text) {
  SanitizeResult out;
  std::string s(text);
  while (true) {
    s = normalize_whitespace(s, out.report);
    auto inner = unwrap_fence(s);
    if (!inner) break;
    note(out.report, "strip_code_fence");
    s = std::move(*inner);
  }
  out.text = std::move(s);
  return out;
}

// ---------------------------------------------------------------------------

WatermarkPattern::WatermarkPattern(std::string spec) : spec_(std::move(spec)) {
  if (spec_.rfind("re:", 0) == 0) {
    const std::string expr = spec_.substr(3);
    try {
      regex_.emplace(expr, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw ConfigError("invalid watermark regex '" + expr + "': " + e.what());
    }
    if (expr.empty() || std::regex_match(std::string(), *regex_)) {
      throw ConfigError("watermark regex matches the empty string: " + expr);
    }
  } else {
    literal_ = spec_;
    if (literal_.empty()) throw ConfigError("empty watermark pattern");
  }
}

std::size_t WatermarkPattern::remove_from(std::string& text) const {
  std::size_t count = 0;
  std::string out;
  out.reserve(text.size());
  if (!regex_) {
    std::size_t pos = 0;
    while (true) {
      const std::size_t hit = text.find(literal_, pos);
      if (hit == std::string::npos) break;
      out.append(text, pos, hit - pos);
      pos = hit + literal_.size();
      ++count;
    }
    out.append(text, pos);
  } else {
    std::size_t pos = 0;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), *regex_);
         it != std::sregex_iterator(); ++it) {
      const auto& m = *it;
      if (m.length(0) == 0) continue;
      const auto at = static_cast<std::size_t>(m.position(0));
      out.append(text, pos, at - pos);
      pos = at + static_cast<std::size_t>(m.length(0));
      ++count;
    }
    out.append(text, pos);
  }
  if (count > 0) text = std::move(out);
  return count;
}

std::vector<WatermarkPattern> compile_patterns(const std::vector<std::string>& specs) {
  std::vector<WatermarkPattern> out;
  out.reserve(specs.size());
  for (const std::string& s : specs) out.emplace_back(s);
  return out;
}

WatermarkResult remove_watermarks(std::string_view text,
                                  const std::vector<WatermarkPattern>& patterns) {
  WatermarkResult r{std::string(text), 0};
  for (const WatermarkPattern& p : patterns) r.count += p.remove_from(r.text);
  return r;
}

WatermarkResult remove_watermarks(std::string_view text, const std::vector<std::string>& patterns) {
  return remove_watermarks(text, compile_patterns(patterns));
}

// ---------------------------------------------------------------------------

CanonicalResult canonicalize_special_pages(const PageOutput& page, double page_area_fraction) {
  if (!(page_area_fraction > 0.0 && page_area_fraction <= 1.0)) {
    throw ConfigError("page_area_fraction must be in (0, 1]");
  }
  CanonicalResult out;
  const Segment* only = nullptr;
  std::size_t content = 0;
  for (const Segment& seg : page.segments) {
    if (const auto* t = std::get_if<markup::Text>(&seg); t && all_space(t->text)) continue;
    ++content;
    only = &seg;
  }
  if (content == 0) {
    out.report.canonical_case = CanonicalCase::BlankPage;
    note(out.report, "blank_page");
    return out;
  }
  if (content == 1) {
    if (const auto* im = std::get_if<markup::Image>(only);
        im && im->ref.bbox && im->ref.bbox->page_fraction() >= page_area_fraction) {
      out.text = std::string(kStandardPlaceholder);
      out.report.canonical_case = CanonicalCase::FullPageImage;
      note(out.report, "full_page_image");
      return out;
    }
  }
  out.text = page.raw.empty() && !page.segments.empty() ? markup::serialize_page(page) : page.raw;
  return out;
}

// ---------------------------------------------------------------------------

std::size_t deflate_size(std::string_view bytes) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -MAX_WBITS, 8, Z_DEFAULT_STRATEGY) !=
      Z_OK) {
    throw std::runtime_error("deflateInit2 failed");
  }
  std::vector<unsigned char> buf(deflateBound(&zs, static_cast<uLong>(bytes.size())) + 16);
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(bytes.data()));
  zs.avail_in = static_cast<uInt>(bytes.size());
  zs.next_out = buf.data();
  zs.avail_out = static_cast<uInt>(buf.size());
  const int rc = deflate(&zs, Z_FINISH);
  const std::size_t out = zs.total_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw std::runtime_error("deflate did not finish");
  return out;
}

LoopReport detect_loops(std::string_view text, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("loop threshold must be in (0, 1), got " + std::to_string(threshold));
  }
  LoopReport r;
  r.threshold = threshold;
  if (text.empty()) {
    r.warnings.emplace_back("empty text; ratio undefined");
    return r;
  }
  r.compression_ratio =
      static_cast<double>(deflate_size(text)) / static_cast<double>(text.size());
  if (text.size() < kMinLoopBytes) {
    r.warnings.emplace_back("text shorter than " + std::to_string(kMinLoopBytes) +
                            " bytes; not flagged");
    return r;
  }
  r.flagged = r.compression_ratio < threshold;
  return r;
}

// ---------------------------------------------------------------------------

std::uint64_t stable_hash(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

CorpusRecord make_record(std::string doc_id, std::string source, std::string text) {
  CorpusRecord r{std::move(doc_id), std::move(source), std::move(text), 0};
  r.normalized_hash = stable_hash(r.text);
  return r;
}

bool Deduplicator::offer(const CorpusRecord& rec) {
  auto& bucket = seen_[rec.normalized_hash];
  const bool dup = std::find(bucket.begin(), bucket.end(), rec.text) != bucket.end();
  SourceStats& src = stats_.per_source[rec.source];
  if (dup) {
    ++src.dropped;
    ++stats_.dropped;
    return false;
  }
  ++src.kept;
  ++stats_.kept;
  bucket.push_back(rec.text);
  return true;
}

DedupResult dedup(std::vector<CorpusRecord> corpus) {
  DedupResult out;
  Deduplicator d;
  for (CorpusRecord& rec : corpus) {
    if (d.offer(rec)) out.records.push_back(std::move(rec));
  }
  out.stats = d.stats();
  return out;
}

// ---------------------------------------------------------------------------

namespace {

bool is_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

std::string trim_copy(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

/// Splits a text run at \section-family commands.
std::vector<Segment> convert_sections(const std::string& text) {
  static const std::regex kSection(R"(\\((?:sub){0,2})section\*?\{([^{}\n]*)\})");
  std::vector<Segment> out;
  std::size_t pos = 0;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kSection);
       it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    std::string title = trim_copy(m.str(2));
    if (title.empty()) continue;
    const auto at = static_cast<std::size_t>(m.position(0));
    std::string before = text.substr(pos, at - pos);
    if (!before.empty() && before.back() == '\n') before.pop_back();
    if (!before.empty()) out.push_back(markup::Text{std::move(before)});
    const int level = static_cast<int>(m.length(1) / 3) + 1;
    out.push_back(markup::Heading{level, std::move(title)});
    pos = at + static_cast<std::size_t>(m.length(0));
    if (pos < text.size() && text[pos] == '\n') ++pos;
  }
  std::string rest = text.substr(pos);
  if (!rest.empty()) out.push_back(markup::Text{std::move(rest)});
  return out;
}

bool is_separator_row(std::string_view line) {
  const std::string t = trim_copy(line);
  if (t.empty() || t.find('-') == std::string::npos) return false;
  return std::all_of(t.begin(), t.end(),
                     [](char c) { return c == '|' || c == '-' || c == ':' || c == ' '; }) &&
         t.find("---") != std::string::npos;
}

bool is_pipe_row(std::string_view line) {
  const std::string t = trim_copy(line);
  return t.size() >= 2 && t.front() == '|';
}

std::vector<std::string> split_cells(std::string_view line) {
  std::string t = trim_copy(line);
  if (!t.empty() && t.front() == '|') t.erase(0, 1);
  if (!t.empty() && t.back() == '|') t.pop_back();
  std::vector<std::string> cells;
  std::size_t pos = 0;
  while (true) {
    const std::size_t bar = t.find('|', pos);
    cells.push_back(trim_copy(std::string_view(t).substr(pos, bar == std::string::npos
                                                                   ? std::string::npos
                                                                   : bar - pos)));
    if (bar == std::string::npos) break;
    pos = bar + 1;
  }
  return cells;
}

std::string pipe_table_to_html(const std::vector<std::string_view>& rows) {
  std::string html = "<table><thead><tr>";
  for (const std::string& cell : split_cells(rows[0])) html += "<th>" + cell + "</th>";
  html += "</tr></thead><tbody>";
  for (std::size_t r = 2; r < rows.size(); ++r) {
    html += "<tr>";
    for (const std::string& cell : split_cells(rows[r])) html += "<td>" + cell + "</td>";
    html += "</tr>";
  }
  html += "</tbody></table>";
  return html;
}

/// Replaces markdown pipe tables inside one text run with HTML tables.
std::vector<Segment> convert_tables(const std::string& text) {
  std::vector<std::string_view> lines;
  std::vector<std::size_t> starts;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    lines.emplace_back(std::string_view(text).substr(pos, nl - pos));
    starts.push_back(pos);
    pos = nl + 1;
  }
  std::vector<Segment> out;
  std::size_t emitted = 0;
  for (std::size_t i = 0; i + 1 < lines.size(); ++i) {
    if (!is_pipe_row(lines[i]) || !is_separator_row(lines[i + 1])) continue;
    std::size_t j = i + 2;
    while (j < lines.size() && is_pipe_row(lines[j]) && !is_separator_row(lines[j])) ++j;
    std::vector<std::string_view> rows(lines.begin() + static_cast<std::ptrdiff_t>(i),
                                       lines.begin() + static_cast<std::ptrdiff_t>(j));
    const std::size_t block_begin = starts[i];
    const std::size_t block_end = starts[j - 1] + lines[j - 1].size();
    if (block_begin > emitted) out.push_back(markup::Text{text.substr(emitted, block_begin - emitted)});
    out.push_back(markup::HtmlTable{pipe_table_to_html(rows)});
    emitted = block_end;
    i = j - 1;
  }
  if (emitted < text.size()) out.push_back(markup::Text{text.substr(emitted)});
  return out;
}

std::size_t count_latex_commands(std::string_view s) {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    if (s[i] != '\\') continue;
    std::size_t k = 0;
    while (i >= k + 1 && s[i - k - 1] == '\\') ++k;
    if (k % 2 == 1) continue;
    if (!is_letter(s[i + 1])) continue;
    ++n;
    while (i + 1 < s.size() && is_letter(s[i + 1])) ++i;
  }
  return n;
}

bool has_missing_numbering(std::string_view s) {
  static const std::regex kMissing(R"((Figure|Fig\.|Table|Eq\.|Equation)\s*\?\?)");
  return std::regex_search(s.begin(), s.end(), kMissing);
}

}  // namespace

ConversionResult convert_and_validate(std::string_view text, const markup::MathAllowlist& allowlist,
                                      std::chrono::milliseconds budget) {
  const auto start = std::chrono::steady_clock::now();
  const PageOutput page = markup::parse_page(text);
  ConversionResult out;
  bool timed_out = false;

  std::vector<Segment> result;
  for (const Segment& seg : page.segments) {
    const auto* t = std::get_if<markup::Text>(&seg);
    if (!t || timed_out) {
      result.push_back(seg);
      continue;
    }
    for (Segment& piece : convert_sections(t->text)) {
      if (const auto* pt = std::get_if<markup::Text>(&piece)) {
        for (Segment& p2 : convert_tables(pt->text)) result.push_back(std::move(p2));
      } else {
        result.push_back(std::move(piece));
      }
    }
    if (std::chrono::steady_clock::now() - start > budget) timed_out = true;
  }

  for (const Segment& seg : result) {
    if (const auto* t = std::get_if<markup::Text>(&seg)) {
      out.metadata.unresolved_references += count_latex_commands(t->text);
      out.metadata.missing_figure_numbering |= has_missing_numbering(t->text);
    } else if (const auto* h = std::get_if<markup::Heading>(&seg)) {
      out.metadata.unresolved_references += count_latex_commands(h->text);
    } else if (const auto* m = std::get_if<markup::InlineMath>(&seg)) {
      out.metadata.math_compatible &= markup::validate_math(m->tex, allowlist).valid;
    } else if (const auto* d = std::get_if<markup::DisplayMath>(&seg)) {
      out.metadata.math_compatible &= markup::validate_math(d->tex, allowlist).valid;
    }
  }
  if (timed_out) {
    out.metadata.status = ConversionStatus::Timeout;
  } else if (out.metadata.unresolved_references > 0 || out.metadata.missing_figure_numbering) {
    out.metadata.status = ConversionStatus::Partial;
  }
  out.text = markup::serialize_segments(result);
  return out;
}

ConversionResult convert_and_validate(std::string_view text) {
  static const markup::MathAllowlist kDefault = markup::MathAllowlist::katex_default();
  return convert_and_validate(text, kDefault);
}

// ---------------------------------------------------------------------------

DocumentResult normalize_document(std::string_view text, const PipelineConfig& config) {
  DocumentResult out;
  SanitizeResult s = sanitize(text);
  out.report = std::move(s.report);

  WatermarkResult w = remove_watermarks(s.text, config.watermarks);
  if (w.count > 0) {
    out.report.removed_watermarks = w.count;
    note(out.report, "remove_watermarks");
    // Removal can leave dangling whitespace; re-harmonize.
    SanitizeResult again = sanitize(w.text);
    for (const std::string& step : again.report.transforms_applied) note(out.report, step);
    w.text = std::move(again.text);
  }

  const PageOutput page = markup::parse_page(w.text);
  CanonicalResult c = canonicalize_special_pages(page, config.page_area_fraction);
  out.report.canonical_case = c.report.canonical_case;
  for (const std::string& step : c.report.transforms_applied) note(out.report, step);

  if (c.report.canonical_case == CanonicalCase::None) {
    ConversionResult conv =
        convert_and_validate(c.text, config.allowlist, config.conversion_budget);
    if (conv.text != c.text) note(out.report, "latex_conversion");
    out.text = std::move(conv.text);
    out.conversion = conv.metadata;
  } else {
    out.text = std::move(c.text);
  }
  for (const markup::ParseWarning& pw : page.warnings) out.report.warnings.push_back(pw.message);

  out.loop = detect_loops(out.text, config.loop_threshold);
  return out;
}

}  // namespace docrl::normalize
