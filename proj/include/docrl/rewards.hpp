#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "docrl/bbox.hpp"
#include "docrl/markup.hpp"
#include "docrl/normalize.hpp"

namespace docrl::rewards {

// Unit tests ------------------------------------------------------------------

struct Present {
  std::string anchor;
  std::size_t max_edit_distance = 0;
};
struct Absent {
  std::string anchor;
};
struct Order {
  std::string first;
  std::string then;
};
struct MathRenders {};
/// Headers, footers and page numbers must be transcribed (presence, not
/// absence). Passes exactly when Present{anchor, max_edit_distance} does.
struct HeaderFooterPresent {
  std::string anchor;
  std::size_t max_edit_distance = 0;
};

using TestCase = std::variant<Present, Absent, Order, MathRenders, HeaderFooterPresent>;

/// Throws DataError on empty anchors or an edit budget above anchor length.
void validate_test(const TestCase& test);

/// Levenshtein distance over Unicode scalar values.
std::size_t edit_distance(std::string_view a, std::string_view b);

/// Smallest edit distance between `anchor` and any substring of `text`.
std::size_t best_substring_distance(std::string_view text, std::string_view anchor);

bool passes(const markup::PageOutput& page, const TestCase& test,
            const markup::MathAllowlist& allowlist);

/// Fraction of tests passed; nullopt (absent component) for an empty list.
std::optional<double> score_unit_tests(const markup::PageOutput& page,
                                       const std::vector<TestCase>& tests,
                                       const markup::MathAllowlist& allowlist);
std::optional<double> score_unit_tests(const markup::PageOutput& page,
                                       const std::vector<TestCase>& tests);

// Page-level components ---------------------------------------------------------

struct RepetitionConfig {
  double threshold = normalize::kDefaultLoopThreshold;
  /// 0 keeps the reward binary. Otherwise the score ramps linearly from 0
  /// at the threshold to 1 at threshold + ramp.
  double partial_credit_ramp = 0.0;
};

double repetition_reward(const markup::PageOutput& page, const RepetitionConfig& config = {});

/// Fraction of math spans that validate; nullopt when the page has none.
std::optional<double> math_reward(const markup::PageOutput& page,
                                  const markup::MathAllowlist& allowlist);
std::optional<double> math_reward(const markup::PageOutput& page);

inline constexpr double kDefaultArtifactPenalty = 0.25;

double formatting_reward(const markup::PageOutput& page,
                         double penalty_per_artifact = kDefaultArtifactPenalty);

// Bounding boxes --------------------------------------------------------------

/// Image ID -> box. A placeholder without coordinates keeps its ID with no
/// box (it scores IoU 0). Repeated IDs keep the first occurrence; the
/// extras are counted in `duplicates` and enlarge the set size.
struct BoxMap {
  std::map<int, std::optional<BBox>> boxes;
  std::size_t duplicates = 0;

  void insert(int id, std::optional<BBox> box);
  std::size_t size() const { return boxes.size() + duplicates; }
  bool empty() const { return size() == 0; }
};

BoxMap box_map_from_page(const markup::PageOutput& page);

/// Mean IoU over shared IDs scaled by |shared| / max(|gt|, |pred|).
/// Both maps empty scores 1.
double bbox_reward(const BoxMap& gt, const BoxMap& pred);

// Aggregation -------------------------------------------------------------------

struct RewardBreakdown {
  std::optional<double> unit_test_score;
  std::optional<double> repetition_score;
  std::optional<double> math_score;
  std::optional<double> formatting_score;
  std::optional<double> bbox_score;
  double aggregate = 0.0;
};

struct RewardWeights {
  double unit_tests = 1.0;
  double repetition = 1.0;
  double math = 1.0;
  double formatting = 1.0;
  double bbox = 1.0;
};

/// Weighted mean over present components. Throws DataError("no reward
/// signal") when nothing is present or all present weights are zero, and
/// ConfigError on negative weights.
double aggregate_reward(const RewardBreakdown& components, const RewardWeights& weights);

struct ScoringConfig {
  markup::MathAllowlist allowlist = markup::MathAllowlist::katex_default();
  RepetitionConfig repetition;
  double artifact_penalty = kDefaultArtifactPenalty;
  RewardWeights weights;
  bool score_bbox = false;
};

/// All components for one rollout. `gt_boxes` enables the bbox component.
RewardBreakdown score_rollout(const markup::PageOutput& page, const std::vector<TestCase>& tests,
                              const std::optional<BoxMap>& gt_boxes, const ScoringConfig& config);

}  // namespace docrl::rewards
