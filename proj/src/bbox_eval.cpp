#include "docrl/bbox_eval.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "docrl/error.hpp"

namespace docrl::bbox_eval {
namespace {

/// Maximum-weight assignment on a square matrix (Hungarian, O(n^3)).
/// Returns row -> column.
std::vector<std::size_t> max_weight_assignment(const std::vector<std::vector<double>>& weight) {
  const std::size_t n = weight.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based potentials, column 0 is the virtual start.
  std::vector<double> u(n + 1, 0.0);
  std::vector<double> v(n + 1, 0.0);
  std::vector<std::size_t> owner(n + 1, 0);
  std::vector<std::size_t> way(n + 1, 0);
  for (std::size_t row = 1; row <= n; ++row) {
    owner[0] = row;
    std::size_t col0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[col0] = true;
      const std::size_t r = owner[col0];
      double delta = kInf;
      std::size_t col1 = 0;
      for (std::size_t c = 1; c <= n; ++c) {
        if (used[c]) continue;
        const double cur = -weight[r - 1][c - 1] - u[r] - v[c];
        if (cur < minv[c]) {
          minv[c] = cur;
          way[c] = col0;
        }
        if (minv[c] < delta) {
          delta = minv[c];
          col1 = c;
        }
      }
      for (std::size_t c = 0; c <= n; ++c) {
        if (used[c]) {
          u[owner[c]] += delta;
          v[c] -= delta;
        } else {
          minv[c] -= delta;
        }
      }
      col0 = col1;
    } while (owner[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      owner[col0] = owner[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<std::size_t> assign(n, 0);
  for (std::size_t c = 1; c <= n; ++c) {
    if (owner[c] != 0) assign[owner[c] - 1] = c - 1;
  }
  return assign;
}

std::vector<Match> match_greedy(const std::vector<BBox>& gt, const std::vector<BBox>& pred,
                                double threshold) {
  std::vector<Match> candidates;
  for (std::size_t g = 0; g < gt.size(); ++g) {
    for (std::size_t p = 0; p < pred.size(); ++p) {
      const double v = iou(gt[g], pred[p]);
      if (v >= threshold) candidates.push_back({g, p, v});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Match& a, const Match& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.gt_index != b.gt_index) return a.gt_index < b.gt_index;
    return a.pred_index < b.pred_index;
  });
  std::vector<bool> gt_used(gt.size(), false);
  std::vector<bool> pred_used(pred.size(), false);
  std::vector<Match> out;
  for (const Match& m : candidates) {
    if (gt_used[m.gt_index] || pred_used[m.pred_index]) continue;
    gt_used[m.gt_index] = pred_used[m.pred_index] = true;
    out.push_back(m);
  }
  return out;
}

std::vector<Match> match_optimal(const std::vector<BBox>& gt, const std::vector<BBox>& pred,
                                 double threshold) {
  const std::size_t n = std::max(gt.size(), pred.size());
  if (gt.empty() || pred.empty()) return {};
  // Each admissible pair is worth more than any IoU total, so cardinality
  // dominates and IoU breaks ties.
  const double bonus = static_cast<double>(n) + 1.0;
  std::vector<std::vector<double>> weight(n, std::vector<double>(n, 0.0));
  std::vector<std::vector<double>> ious(gt.size(), std::vector<double>(pred.size(), 0.0));
  for (std::size_t g = 0; g < gt.size(); ++g) {
    for (std::size_t p = 0; p < pred.size(); ++p) {
      const double v = iou(gt[g], pred[p]);
      ious[g][p] = v;
      if (v >= threshold) weight[g][p] = bonus + v;
    }
  }
  const std::vector<std::size_t> assign = max_weight_assignment(weight);
  std::vector<Match> out;
  for (std::size_t g = 0; g < gt.size(); ++g) {
    const std::size_t p = assign[g];
    if (p < pred.size() && weight[g][p] > 0.0) out.push_back({g, p, ious[g][p]});
  }
  return out;
}

}  // namespace

std::vector<Match> match_boxes(const std::vector<BBox>& gt, const std::vector<BBox>& pred,
                               double iou_threshold, Matcher matcher) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw ConfigError("IoU threshold must be in (0, 1]");
  }
  std::vector<Match> out = matcher == Matcher::Greedy ? match_greedy(gt, pred, iou_threshold)
                                                      : match_optimal(gt, pred, iou_threshold);
  std::sort(out.begin(), out.end(),
            [](const Match& a, const Match& b) { return a.gt_index < b.gt_index; });
  return out;
}

PageEval evaluate_page(const PageBoxes& gt, const PageBoxes& pred, double iou_threshold,
                       Matcher matcher) {
  if (gt.doc_id != pred.doc_id) {
    throw DataError("pairing error: gt '" + gt.doc_id + "' vs pred '" + pred.doc_id + "'");
  }
  PageEval e;
  const std::vector<Match> matches = match_boxes(gt.boxes, pred.boxes, iou_threshold, matcher);
  e.tp = matches.size();
  e.fp = pred.boxes.size() - e.tp;
  e.fn = gt.boxes.size() - e.tp;
  for (const Match& m : matches) e.matched_ious.push_back(m.iou);
  e.count_exact = gt.boxes.size() == pred.boxes.size();
  return e;
}

std::map<std::string, SubsetReport> evaluate_corpus(const std::vector<PageBoxes>& gt,
                                                    const std::vector<PageBoxes>& pred,
                                                    const EvalConfig& config) {
  std::unordered_map<std::string, std::size_t> gt_index;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!gt_index.emplace(gt[i].doc_id, i).second) {
      throw DataError("duplicate ground-truth doc_id: " + gt[i].doc_id);
    }
  }
  std::unordered_map<std::string, std::size_t> pred_index;
  std::vector<std::string> orphans;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!gt_index.contains(pred[i].doc_id)) {
      orphans.push_back(pred[i].doc_id);
      continue;
    }
    if (!pred_index.emplace(pred[i].doc_id, i).second) {
      throw DataError("duplicate prediction doc_id: " + pred[i].doc_id);
    }
  }
  if (!orphans.empty()) {
    std::string msg = "predictions without ground truth:";
    for (const std::string& id : orphans) msg += " " + id;
    throw DataError(msg);
  }

  struct Acc {
    SubsetReport report;
    double iou_sum = 0.0;
    std::size_t exact = 0;
  };
  std::map<std::string, Acc> acc;
  for (const PageBoxes& g : gt) {
    const auto it = pred_index.find(g.doc_id);
    const PageBoxes empty{g.doc_id, g.subset, {}};
    const PageBoxes& p = it == pred_index.end() ? empty : pred[it->second];
    const PageEval e = evaluate_page(g, p, config.iou_threshold, config.matcher);
    Acc& a = acc[g.subset];
    a.report.pages += 1;
    a.report.tp += e.tp;
    a.report.fp += e.fp;
    a.report.fn += e.fn;
    a.report.gt_boxes += g.boxes.size();
    a.iou_sum += std::accumulate(e.matched_ious.begin(), e.matched_ious.end(), 0.0);
    a.exact += e.count_exact ? 1 : 0;
  }

  std::map<std::string, SubsetReport> out;
  for (auto& [name, a] : acc) {
    SubsetReport r = a.report;
    const std::size_t denom = 2 * r.tp + r.fp + r.fn;
    r.f1_at_05 = denom == 0 ? 1.0 : 2.0 * static_cast<double>(r.tp) / static_cast<double>(denom);
    if (r.gt_boxes == 0) {
      r.mean_iou = r.fp == 0 ? 1.0 : 0.0;
    } else {
      r.mean_iou = a.iou_sum / static_cast<double>(r.gt_boxes);
    }
    r.count_accuracy = 100.0 * static_cast<double>(a.exact) / static_cast<double>(r.pages);
    out.emplace(name, r);
  }
  return out;
}

}  // namespace docrl::bbox_eval
