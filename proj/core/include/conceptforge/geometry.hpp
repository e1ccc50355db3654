#pragma once

#include <cstdint>

namespace conceptforge {

/// Grid cell of a layer response: `row` indexes height (i), `col` width (j).
struct GridPos {
  uint32_t row = 0;
  uint32_t col = 0;

  friend bool operator==(const GridPos&, const GridPos&) = default;
  friend auto operator<=>(const GridPos&, const GridPos&) = default;
};

/// Pixel position in the resized object-crop frame.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline double squared_distance(const Point& a, const Point& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

/// Axis-aligned pixel rectangle; `x`, `y` is the top-left pixel.
struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  friend bool operator==(const Rect&, const Rect&) = default;
};

}  // namespace conceptforge
