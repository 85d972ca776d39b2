#pragma once

#include <cstddef>
#include <vector>

#include "chromseg/raster.hpp"

namespace chromseg {

// Pixel-space point: x = column, y = row (y grows downward).
struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

// Closed polygon; the last vertex connects back to the first.
struct Polygon {
  std::vector<Point> vertices;

  std::size_t size() const noexcept { return vertices.size(); }
  // Fewer than 3 vertices: a point or a segment, not an area.
  bool degenerate() const noexcept { return vertices.size() < 3; }
};

// Shoelace sum in (x, y) pixel coordinates. Positive for polygons that run
// clockwise on screen (y down), negative for counterclockwise.
double signed_area(const Polygon& poly);

// Absolute area.
double polygon_area(const Polygon& poly);

// 4-connected component labelling. Background (0) stays 0; components are
// numbered 1..count in raster-scan order of their first pixel.
struct Components {
  Raster<int> labels;
  std::vector<std::size_t> sizes;  // sizes[k-1] is the pixel count of component k
  std::size_t count() const noexcept { return sizes.size(); }
};
Components label_components(const Mask& mask);

// Keeps only the largest 4-connected component (first in scan order on ties).
Mask largest_component(const Mask& mask);

// Pixel-centre containment, even-odd rule.
bool point_in_polygon(const Polygon& poly, Point p);

// Distance from p to the closed segment [a, b].
double point_segment_distance(Point p, Point a, Point b);

}  // namespace chromseg
