#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "docrl/markup.hpp"

namespace docrl::normalize {

/// Outputs whose DEFLATE ratio falls below this are repetition loops
/// (zlib-ratio cutoff used to count loopy generations, 0.13).
inline constexpr double kDefaultLoopThreshold = 0.13;
/// Below this many bytes compression overhead dominates; never flag.
inline constexpr std::size_t kMinLoopBytes = 200;
/// A lone image covering at least this page fraction is a full-page image.
inline constexpr double kDefaultPageAreaFraction = 0.95;
/// Per-document wall-clock budget for the LaTeX conversion pass.
inline constexpr std::chrono::milliseconds kDefaultConversionBudget{5000};

/// The fixed target for full-page images.
inline constexpr std::string_view kStandardPlaceholder = "![image](image_1.png)";

enum class CanonicalCase { None, FullPageImage, BlankPage };
std::string_view to_string(CanonicalCase c);

struct NormalizationReport {
  std::vector<std::string> transforms_applied;
  std::size_t removed_watermarks = 0;
  CanonicalCase canonical_case = CanonicalCase::None;
  std::vector<std::string> warnings;
};

struct SanitizeResult {
  std::string text;
  NormalizationReport report;
};

/// Strips document-wrapping code fences, normalizes CRLF, trailing
/// whitespace, runs of blank lines and leading/trailing blank space.
SanitizeResult sanitize(std::string_view text);

/// Watermark pattern: literal text, or an ECMAScript regex when prefixed
/// with `re:`. Throws ConfigError on invalid or empty-matching patterns.
class WatermarkPattern {
 public:
  explicit WatermarkPattern(std::string spec);

  const std::string& spec() const { return spec_; }
  /// Removes all non-overlapping matches; returns the number removed.
  std::size_t remove_from(std::string& text) const;

 private:
  std::string spec_;
  std::string literal_;
  std::optional<std::regex> regex_;
};

std::vector<WatermarkPattern> compile_patterns(const std::vector<std::string>& specs);

struct WatermarkResult {
  std::string text;
  std::size_t count = 0;
};

WatermarkResult remove_watermarks(std::string_view text,
                                  const std::vector<WatermarkPattern>& patterns);
WatermarkResult remove_watermarks(std::string_view text, const std::vector<std::string>& patterns);

struct CanonicalResult {
  std::string text;
  NormalizationReport report;
};

CanonicalResult canonicalize_special_pages(const markup::PageOutput& page,
                                           double page_area_fraction = kDefaultPageAreaFraction);

struct LoopReport {
  double compression_ratio = 1.0;
  bool flagged = false;
  double threshold = kDefaultLoopThreshold;
  std::vector<std::string> warnings;
};

/// Raw DEFLATE (RFC 1951) at the default level.
std::size_t deflate_size(std::string_view bytes);

/// compressed/original byte ratio; flags when below `threshold`.
/// Throws ConfigError unless 0 < threshold < 1.
LoopReport detect_loops(std::string_view text, double threshold = kDefaultLoopThreshold);

/// FNV-1a over the UTF-8 bytes.
std::uint64_t stable_hash(std::string_view bytes);

struct CorpusRecord {
  std::string doc_id;
  std::string source;
  std::string text;
  std::uint64_t normalized_hash = 0;
};

/// Sets `normalized_hash` from `text` (already normalized).
CorpusRecord make_record(std::string doc_id, std::string source, std::string text);

struct SourceStats {
  std::size_t kept = 0;
  std::size_t dropped = 0;
};

struct DedupStats {
  std::size_t kept = 0;
  std::size_t dropped = 0;
  std::map<std::string, SourceStats> per_source;
};

struct DedupResult {
  std::vector<CorpusRecord> records;
  DedupStats stats;
};

/// Streaming form of dedup: offer records in input order.
class Deduplicator {
 public:
  /// True for the first record with this normalized text.
  bool offer(const CorpusRecord& rec);
  const DedupStats& stats() const { return stats_; }

 private:
  std::unordered_map<std::uint64_t, std::vector<std::string>> seen_;
  DedupStats stats_;
};

/// Exact-match dedup on normalized text; first occurrence wins.
DedupResult dedup(std::vector<CorpusRecord> corpus);

enum class ConversionStatus { Success, Partial, Timeout };
std::string_view to_string(ConversionStatus s);

struct ConversionMetadata {
  ConversionStatus status = ConversionStatus::Success;
  std::size_t unresolved_references = 0;
  bool missing_figure_numbering = false;
  bool math_compatible = true;
};

struct ConversionResult {
  std::string text;
  ConversionMetadata metadata;
};

/// Sectioning commands become markdown headings, pipe tables become HTML,
/// leftover LaTeX outside math is counted as unresolved.
ConversionResult convert_and_validate(
    std::string_view text, const markup::MathAllowlist& allowlist,
    std::chrono::milliseconds budget = kDefaultConversionBudget);
ConversionResult convert_and_validate(std::string_view text);

// ---------------------------------------------------------------------------
// Whole-document pipeline used by the CLI.

struct PipelineConfig {
  std::vector<WatermarkPattern> watermarks;
  markup::MathAllowlist allowlist = markup::MathAllowlist::katex_default();
  double loop_threshold = kDefaultLoopThreshold;
  double page_area_fraction = kDefaultPageAreaFraction;
  std::chrono::milliseconds conversion_budget = kDefaultConversionBudget;
};

struct DocumentResult {
  std::string text;
  NormalizationReport report;
  ConversionMetadata conversion;
  LoopReport loop;
};

/// sanitize -> watermarks -> special pages -> conversion -> loop check.
DocumentResult normalize_document(std::string_view text, const PipelineConfig& config);

}  // namespace docrl::normalize
