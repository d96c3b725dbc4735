#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace docrl {

/// Upper bound of the normalized page coordinate space (both axes).
inline constexpr int kCoordMax = 1000;

/// Axis-aligned box in normalized page coordinates, 1/1000 of width/height.
struct BBox {
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;

  friend bool operator==(const BBox&, const BBox&) = default;

  bool valid() const {
    return 0 <= x1 && x1 <= x2 && x2 <= kCoordMax && 0 <= y1 && y1 <= y2 && y2 <= kCoordMax;
  }
  bool degenerate() const { return x1 == x2 || y1 == y2; }
  std::int64_t area() const {
    return static_cast<std::int64_t>(x2 - x1) * static_cast<std::int64_t>(y2 - y1);
  }
  /// Fraction of the page covered, in [0,1].
  double page_fraction() const {
    return static_cast<double>(area()) / (static_cast<double>(kCoordMax) * kCoordMax);
  }

  std::string to_string() const;
};

/// Intersection over union. Zero whenever the union has zero area, so
/// degenerate boxes never overlap anything (including themselves).
double iou(const BBox& a, const BBox& b);

}  // namespace docrl
