#include "chromseg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace chromseg {

double signed_area(const Polygon& poly) {
  const auto& v = poly.vertices;
  if (v.size() < 3) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point& a = v[i];
    const Point& b = v[(i + 1) % v.size()];
    s += a.x * b.y - b.x * a.y;
  }
  return 0.5 * s;
}

double polygon_area(const Polygon& poly) { return std::abs(signed_area(poly)); }

Components label_components(const Mask& mask) {
  Components out{Raster<int>(mask.height, mask.width, 0), {}};
  std::vector<std::pair<int, int>> stack;
  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c) {
      if (!mask(r, c) || out.labels(r, c)) continue;
      const int id = static_cast<int>(out.sizes.size()) + 1;
      std::size_t size = 0;
      stack.assign(1, {r, c});
      out.labels(r, c) = id;
      while (!stack.empty()) {
        auto [y, x] = stack.back();
        stack.pop_back();
        ++size;
        constexpr int dy[4] = {-1, 1, 0, 0};
        constexpr int dx[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          const int ny = y + dy[k], nx = x + dx[k];
          if (mask.contains(ny, nx) && mask(ny, nx) && !out.labels(ny, nx)) {
            out.labels(ny, nx) = id;
            stack.emplace_back(ny, nx);
          }
        }
      }
      out.sizes.push_back(size);
    }
  }
  return out;
}

Mask largest_component(const Mask& mask) {
  const Components cc = label_components(mask);
  Mask out(mask.height, mask.width, 0);
  if (cc.count() == 0) return out;
  const int keep = static_cast<int>(std::max_element(cc.sizes.begin(), cc.sizes.end()) - cc.sizes.begin()) + 1;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = cc.labels.data[i] == keep ? 1 : 0;
  return out;
}

bool point_in_polygon(const Polygon& poly, Point p) {
  const auto& v = poly.vertices;
  bool inside = false;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    if ((v[i].y > p.y) != (v[j].y > p.y)) {
      const double x_cross = v[j].x + (p.y - v[j].y) * (v[i].x - v[j].x) / (v[i].y - v[j].y);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

double point_segment_distance(Point p, Point a, Point b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((p.x - a.x) * vx + (p.y - a.y) * vy) / len2, 0.0, 1.0);
  const double dx = p.x - (a.x + t * vx), dy = p.y - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace chromseg
