#include "docrl/rewards.hpp"

#include <algorithm>
#include <cmath>

#include "docrl/error.hpp"
#include "docrl/utf8.hpp"

namespace docrl::rewards {
namespace {

template <class... Fs>
struct Overload : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overload(Fs...) -> Overload<Fs...>;

std::string page_text(const markup::PageOutput& page) {
  return page.raw.empty() && !page.segments.empty() ? markup::serialize_page(page) : page.raw;
}

bool present(std::string_view text, std::string_view anchor, std::size_t max_edits) {
  if (text.find(anchor) != std::string_view::npos) return true;
  if (max_edits == 0) return false;
  return best_substring_distance(text, anchor) <= max_edits;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

void validate_test(const TestCase& test) {
  auto check_anchor = [](const std::string& a, std::size_t edits) {
    if (a.empty()) throw DataError("test anchor must be non-empty");
    if (edits > utf8::decode(a).size()) {
      throw DataError("max_edit_distance exceeds anchor length for anchor '" + a + "'");
    }
  };
  std::visit(Overload{
                 [&](const Present& t) { check_anchor(t.anchor, t.max_edit_distance); },
                 [&](const Absent& t) { check_anchor(t.anchor, 0); },
                 [&](const Order& t) {
                   check_anchor(t.first, 0);
                   check_anchor(t.then, 0);
                 },
                 [](const MathRenders&) {},
                 [&](const HeaderFooterPresent& t) { check_anchor(t.anchor, t.max_edit_distance); },
             },
             test);
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  const std::vector<char32_t> x = utf8::decode(a);
  const std::vector<char32_t> y = utf8::decode(b);
  std::vector<std::size_t> prev(y.size() + 1);
  std::vector<std::size_t> cur(y.size() + 1);
  for (std::size_t j = 0; j <= y.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= x.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (x[i - 1] == y[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[y.size()];
}

std::size_t best_substring_distance(std::string_view text, std::string_view anchor) {
  // Sellers' variant: free start and end positions in the text.
  const std::vector<char32_t> t = utf8::decode(text);
  const std::vector<char32_t> p = utf8::decode(anchor);
  std::vector<std::size_t> col(p.size() + 1);
  for (std::size_t i = 0; i <= p.size(); ++i) col[i] = i;
  std::size_t best = col[p.size()];
  for (char32_t c : t) {
    std::size_t diag = col[0];
    col[0] = 0;
    for (std::size_t i = 1; i <= p.size(); ++i) {
      const std::size_t up = col[i];
      col[i] = std::min({col[i] + 1, col[i - 1] + 1, diag + (p[i - 1] == c ? 0 : 1)});
      diag = up;
    }
    best = std::min(best, col[p.size()]);
  }
  return best;
}

bool passes(const markup::PageOutput& page, const TestCase& test,
            const markup::MathAllowlist& allowlist) {
  const std::string text = page_text(page);
  return std::visit(
      Overload{
          [&](const Present& t) { return present(text, t.anchor, t.max_edit_distance); },
          [&](const Absent& t) { return text.find(t.anchor) == std::string::npos; },
          [&](const Order& t) {
            const std::size_t a = text.find(t.first);
            const std::size_t b = text.find(t.then);
            return a != std::string::npos && b != std::string::npos && a < b;
          },
          [&](const MathRenders&) {
            for (const markup::MathSpan& span : markup::extract_math_spans(page)) {
              if (!markup::validate_math(span.tex, allowlist).valid) return false;
            }
            return true;
          },
          [&](const HeaderFooterPresent& t) {
            return present(text, t.anchor, t.max_edit_distance);
          },
      },
      test);
}

std::optional<double> score_unit_tests(const markup::PageOutput& page,
                                       const std::vector<TestCase>& tests,
                                       const markup::MathAllowlist& allowlist) {
  if (tests.empty()) return std::nullopt;
  std::size_t passed = 0;
  for (const TestCase& t : tests) passed += passes(page, t, allowlist) ? 1 : 0;
  return static_cast<double>(passed) / static_cast<double>(tests.size());
}

std::optional<double> score_unit_tests(const markup::PageOutput& page,
                                       const std::vector<TestCase>& tests) {
  static const markup::MathAllowlist kDefault = markup::MathAllowlist::katex_default();
  return score_unit_tests(page, tests, kDefault);
}

double repetition_reward(const markup::PageOutput& page, const RepetitionConfig& config) {
  if (config.partial_credit_ramp < 0.0) throw ConfigError("partial_credit_ramp must be >= 0");
  if (!page.terminated_with_eos) return 0.0;
  const normalize::LoopReport loop = normalize::detect_loops(page_text(page), config.threshold);
  if (loop.flagged) return 0.0;
  if (config.partial_credit_ramp == 0.0 || loop.compression_ratio >= 1.0 ||
      !loop.warnings.empty()) {
    return 1.0;
  }
  return clamp01((loop.compression_ratio - config.threshold) / config.partial_credit_ramp);
}

std::optional<double> math_reward(const markup::PageOutput& page,
                                  const markup::MathAllowlist& allowlist) {
  const std::vector<markup::MathSpan> spans = markup::extract_math_spans(page);
  if (spans.empty()) return std::nullopt;
  std::size_t ok = 0;
  for (const markup::MathSpan& s : spans) ok += markup::validate_math(s.tex, allowlist).valid ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(spans.size());
}

std::optional<double> math_reward(const markup::PageOutput& page) {
  static const markup::MathAllowlist kDefault = markup::MathAllowlist::katex_default();
  return math_reward(page, kDefault);
}

double formatting_reward(const markup::PageOutput& page, double penalty_per_artifact) {
  if (penalty_per_artifact < 0.0) throw ConfigError("artifact penalty must be >= 0");
  const std::size_t n = markup::detect_format_artifacts(page).size();
  if (n == 0) return 1.0;
  return std::max(0.0, 1.0 - penalty_per_artifact * static_cast<double>(n));
}

// ---------------------------------------------------------------------------

void BoxMap::insert(int id, std::optional<BBox> box) {
  if (!boxes.emplace(id, box).second) ++duplicates;
}

BoxMap box_map_from_page(const markup::PageOutput& page) {
  BoxMap map;
  for (const markup::Segment& seg : page.segments) {
    if (const auto* im = std::get_if<markup::Image>(&seg)) map.insert(im->ref.id, im->ref.bbox);
  }
  return map;
}

double bbox_reward(const BoxMap& gt, const BoxMap& pred) {
  if (gt.empty() && pred.empty()) return 1.0;
  double iou_sum = 0.0;
  std::size_t shared = 0;
  for (const auto& [id, gt_box] : gt.boxes) {
    const auto it = pred.boxes.find(id);
    if (it == pred.boxes.end()) continue;
    ++shared;
    if (gt_box && it->second) iou_sum += iou(*it->second, *gt_box);
  }
  if (shared == 0) return 0.0;
  const double mean_iou = iou_sum / static_cast<double>(shared);
  const double overlap =
      static_cast<double>(shared) / static_cast<double>(std::max(gt.size(), pred.size()));
  return mean_iou * overlap;
}

// ---------------------------------------------------------------------------

double aggregate_reward(const RewardBreakdown& c, const RewardWeights& w) {
  const std::pair<const std::optional<double>*, double> parts[] = {
      {&c.unit_test_score, w.unit_tests}, {&c.repetition_score, w.repetition},
      {&c.math_score, w.math},            {&c.formatting_score, w.formatting},
      {&c.bbox_score, w.bbox},
  };
  double num = 0.0;
  double den = 0.0;
  for (const auto& [value, weight] : parts) {
    if (weight < 0.0 || std::isnan(weight)) throw ConfigError("reward weights must be >= 0");
    if (!value->has_value()) continue;
    num += weight * clamp01(**value);
    den += weight;
  }
  if (den == 0.0) throw DataError("no reward signal");
  return clamp01(num / den);
}

RewardBreakdown score_rollout(const markup::PageOutput& page, const std::vector<TestCase>& tests,
                              const std::optional<BoxMap>& gt_boxes, const ScoringConfig& config) {
  RewardBreakdown r;
  r.unit_test_score = score_unit_tests(page, tests, config.allowlist);
  r.repetition_score = repetition_reward(page, config.repetition);
  r.math_score = math_reward(page, config.allowlist);
  r.formatting_score = formatting_reward(page, config.artifact_penalty);
  if (gt_boxes) r.bbox_score = bbox_reward(*gt_boxes, box_map_from_page(page));
  r.aggregate = aggregate_reward(r, config.weights);
  return r;
}

}  // namespace docrl::rewards
