#pragma once

#include <map>
#include <string>
#include <vector>

#include "docrl/bbox.hpp"

namespace docrl::bbox_eval {

inline constexpr double kDefaultIouThreshold = 0.5;

struct PageBoxes {
  std::string doc_id;
  std::string subset;
  std::vector<BBox> boxes;
};

struct Match {
  std::size_t gt_index = 0;
  std::size_t pred_index = 0;
  double iou = 0.0;

  friend bool operator==(const Match&, const Match&) = default;
};

enum class Matcher {
  /// Maximum number of pairs at or above the threshold, then maximum total
  /// IoU (exact assignment).
  Optimal,
  /// Candidate pairs by descending IoU, ties by lower gt then pred index.
  Greedy,
};

/// One-to-one matching restricted to pairs with IoU >= threshold, sorted by
/// gt index. Throws ConfigError unless 0 < threshold <= 1.
std::vector<Match> match_boxes(const std::vector<BBox>& gt, const std::vector<BBox>& pred,
                               double iou_threshold = kDefaultIouThreshold,
                               Matcher matcher = Matcher::Optimal);

struct PageEval {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::vector<double> matched_ious;
  bool count_exact = false;
};

/// Throws DataError when the doc ids differ.
PageEval evaluate_page(const PageBoxes& gt, const PageBoxes& pred,
                       double iou_threshold = kDefaultIouThreshold,
                       Matcher matcher = Matcher::Optimal);

struct SubsetReport {
  double f1_at_05 = 0.0;
  double mean_iou = 0.0;
  double count_accuracy = 0.0;  // percent of pages with the exact box count
  std::size_t pages = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t gt_boxes = 0;
};

struct EvalConfig {
  double iou_threshold = kDefaultIouThreshold;
  Matcher matcher = Matcher::Optimal;
};

/// Micro-averaged metrics per gt subset. Pages without predictions score
/// as all misses; predictions without ground truth raise DataError listing
/// the orphan ids.
std::map<std::string, SubsetReport> evaluate_corpus(const std::vector<PageBoxes>& gt,
                                                    const std::vector<PageBoxes>& pred,
                                                    const EvalConfig& config = {});

}  // namespace docrl::bbox_eval
