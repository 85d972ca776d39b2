#include "chromseg/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <utility>

namespace chromseg::baselines {

namespace {

// Even-odd containment, widened to points within `tolerance` of an edge.
bool inside_or_near(const Polygon& poly, Point p, double tolerance) {
  if (point_in_polygon(poly, p)) return true;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i)
    if (point_segment_distance(p, poly.vertices[i], poly.vertices[(i + 1) % n]) <= tolerance) return true;
  return false;
}

// Merged truth index: 0 background, 1 chromosome, 2 overlap.
int merged_index(std::uint8_t label) {
  switch (label) {
    case 0: return 0;
    case 1:
    case 2: return 1;
    case 3: return 2;
    default: throw StructuralError("label value outside 0..3");
  }
}

// Clockwise on screen (y down), starting west.
constexpr int kRingDy[8] = {0, -1, -1, -1, 0, 1, 1, 1};
constexpr int kRingDx[8] = {-1, -1, 0, 1, 1, 1, 0, -1};

int ring_index(int dy, int dx) {
  for (int k = 0; k < 8; ++k)
    if (kRingDy[k] == dy && kRingDx[k] == dx) return k;
  throw StructuralError("trace_contour: backtrack is not a neighbour");
}

}  // namespace

ThresholdModel fit_threshold(const Dataset& train_set) {
  std::array<std::array<std::uint64_t, 256>, 3> counts{};
  for (const Sample& s : train_set) {
    if (!s.image.same_dims(s.label)) throw StructuralError("fit_threshold: image/label dims differ");
    for (std::size_t i = 0; i < s.image.size(); ++i) ++counts[merged_index(s.label.data[i])][to_byte(s.image.data[i])];
  }
  // prefix[k][v] = pixels of class k with byte value < v.
  std::array<std::array<std::uint64_t, 257>, 3> prefix{};
  for (int k = 0; k < 3; ++k)
    for (int v = 0; v < 256; ++v) prefix[k][v + 1] = prefix[k][v] + counts[k][v];
  auto range = [&](int k, int lo, int hi) { return prefix[k][hi] - prefix[k][lo]; };  // [lo, hi)

  ThresholdModel best{0, 1};
  std::uint64_t best_correct = 0;
  bool first = true;
  for (int lo = 0; lo < 255; ++lo) {
    const std::uint64_t bg_ok = range(0, 0, lo + 1);
    for (int hi = lo + 1; hi <= 255; ++hi) {
      const std::uint64_t correct = bg_ok + range(1, lo + 1, hi + 1) + range(2, hi + 1, 256);
      if (first || correct > best_correct) {
        best_correct = correct;
        best = {lo, hi};
        first = false;
      }
    }
  }
  return best;
}

LabelMap threshold_predict(const ThresholdModel& model, const GrayImage& image) {
  LabelMap out(image.height, image.width);
  for (std::size_t i = 0; i < image.size(); ++i) {
    const int v = to_byte(image.data[i]);
    out.data[i] = v <= model.low_bin ? 0 : (v <= model.high_bin ? 1 : 3);
  }
  return out;
}

Polygon trace_contour(const Mask& mask) {
  int sy = -1, sx = -1;
  for (int r = 0; r < mask.height && sy < 0; ++r)
    for (int c = 0; c < mask.width; ++c)
      if (mask(r, c)) {
        sy = r;
        sx = c;
        break;
      }
  if (sy < 0) throw StructuralError("trace_contour: empty mask");
  auto fg = [&](int r, int c) { return mask.contains(r, c) && mask(r, c) != 0; };

  // Finds the next boundary pixel clockwise from the backtrack position.
  struct Step {
    int y, x, by, bx;
    bool found;
  };
  auto advance = [&](int y, int x, int by, int bx) -> Step {
    const int start = ring_index(by - y, bx - x);
    int prev_y = by, prev_x = bx;
    for (int i = 1; i <= 8; ++i) {
      const int k = (start + i) % 8;
      const int ny = y + kRingDy[k], nx = x + kRingDx[k];
      if (fg(ny, nx)) return {ny, nx, prev_y, prev_x, true};
      prev_y = ny;
      prev_x = nx;
    }
    return {y, x, by, bx, false};
  };

  Polygon poly;
  poly.vertices.push_back({static_cast<double>(sx), static_cast<double>(sy)});
  const Step first = advance(sy, sx, sy, sx - 1);
  if (!first.found) return poly;

  Step cur = first;
  // Stop when the walk is about to repeat its first move out of the start pixel.
  const std::size_t limit = 4 * mask.size() + 8;
  for (std::size_t guard = 0; guard < limit; ++guard) {
    const Step next = advance(cur.y, cur.x, cur.by, cur.bx);
    if (cur.y == sy && cur.x == sx && next.y == first.y && next.x == first.x) break;
    poly.vertices.push_back({static_cast<double>(cur.x), static_cast<double>(cur.y)});
    cur = next;
  }
  // The walk above is clockwise on screen; positive shoelace area in y-down coordinates.
  if (signed_area(poly) > 0) std::reverse(poly.vertices.begin() + 1, poly.vertices.end());
  return poly;
}

std::vector<Point> simplify_polyline(const std::vector<Point>& points, double epsilon) {
  if (epsilon <= 0 || points.size() < 3) return points;
  std::vector<char> keep(points.size(), 0);
  keep.front() = keep.back() = 1;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, points.size() - 1}};
  while (!stack.empty()) {
    auto [a, b] = stack.back();
    stack.pop_back();
    double worst = -1;
    std::size_t worst_i = a;
    for (std::size_t i = a + 1; i < b; ++i) {
      const double d = point_segment_distance(points[i], points[a], points[b]);
      if (d > worst) {
        worst = d;
        worst_i = i;
      }
    }
    if (worst > epsilon) {
      keep[worst_i] = 1;
      stack.emplace_back(a, worst_i);
      stack.emplace_back(worst_i, b);
    }
  }
  std::vector<Point> out;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (keep[i]) out.push_back(points[i]);
  return out;
}

Polygon polygonal_approx(const Polygon& polygon, double epsilon) {
  const auto& v = polygon.vertices;
  if (epsilon <= 0 || v.size() < 4) return polygon;
  std::size_t far = 0;
  double far_d = -1;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double d = std::hypot(v[i].x - v[0].x, v[i].y - v[0].y);
    if (d > far_d) {
      far_d = d;
      far = i;
    }
  }
  std::vector<Point> first(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(far) + 1);
  std::vector<Point> second(v.begin() + static_cast<std::ptrdiff_t>(far), v.end());
  second.push_back(v.front());
  const auto a = simplify_polyline(first, epsilon);
  const auto b = simplify_polyline(second, epsilon);
  Polygon out;
  out.vertices = a;
  out.vertices.insert(out.vertices.end(), b.begin() + 1, b.end() - 1);
  return out;
}

std::vector<RemarkablePoint> find_remarkable_points(const Polygon& polygon, double margin_deg) {
  std::vector<RemarkablePoint> out;
  const auto& v = polygon.vertices;
  if (v.size() < 4) return out;
  const double area = signed_area(polygon);
  if (area == 0) return out;
  const double s = area > 0 ? 1.0 : -1.0;
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = v[(i + n - 1) % n];
    const Point& b = v[i];
    const Point& c = v[(i + 1) % n];
    const double e1x = b.x - a.x, e1y = b.y - a.y, e2x = c.x - b.x, e2y = c.y - b.y;
    const double turn = std::atan2(e1x * e2y - e1y * e2x, e1x * e2x + e1y * e2y) * 180.0 / std::numbers::pi;
    const double interior = 180.0 - s * turn;
    if (interior > 180.0 + margin_deg) out.push_back({i, b, interior});
  }
  return out;
}

std::vector<RemarkablePoint> sharpest(std::vector<RemarkablePoint> points, std::size_t count) {
  if (points.size() <= count) return points;
  std::stable_sort(points.begin(), points.end(),
                   [](const RemarkablePoint& a, const RemarkablePoint& b) { return a.interior_angle_deg > b.interior_angle_deg; });
  points.resize(count);
  std::sort(points.begin(), points.end(), [](const RemarkablePoint& a, const RemarkablePoint& b) { return a.index < b.index; });
  return points;
}

CrossingDomain crossing_domain(const std::vector<Point>& points, const Mask& mask) {
  CrossingDomain out;
  if (points.size() != 4) return out;
  Point mean{};
  for (const Point& p : points) {
    mean.x += p.x / 4;
    mean.y += p.y / 4;
  }
  Polygon quad{points};
  std::sort(quad.vertices.begin(), quad.vertices.end(), [&](const Point& a, const Point& b) {
    return std::atan2(a.y - mean.y, a.x - mean.x) < std::atan2(b.y - mean.y, b.x - mean.x);
  });
  if (polygon_area(quad) < 1e-6) {
    out.status = CrossingStatus::degenerate;
    return out;
  }
  out.status = CrossingStatus::ok;
  out.region = Mask(mask.height, mask.width, 0);
  for (int r = 0; r < mask.height; ++r)
    for (int c = 0; c < mask.width; ++c)
      if (mask(r, c) && inside_or_near(quad, {static_cast<double>(c), static_cast<double>(r)}, 0.5))
        out.region(r, c) = 1;
  return out;
}

std::array<Pairing, 3> enumerate_pairings(const std::array<int, 4>& a) {
  return {{{{{a[0], a[1]}, {a[2], a[3]}}}, {{{a[0], a[2]}, {a[1], a[3]}}}, {{{a[0], a[3]}, {a[1], a[2]}}}}};
}

GeometricResult geometric_resolve(const GrayImage& image, const ThresholdModel& model, const GeometricParams& params) {
  GeometricResult fallback{threshold_predict(model, image), false};
  Mask binary(image.height, image.width, 0);
  for (std::size_t i = 0; i < image.size(); ++i) binary.data[i] = to_byte(image.data[i]) > model.low_bin ? 1 : 0;
  const Mask body = largest_component(binary);
  if (std::none_of(body.data.begin(), body.data.end(), [](auto v) { return v != 0; })) return fallback;

  const Polygon contour = trace_contour(body);
  if (contour.degenerate()) return fallback;
  const Polygon approx = polygonal_approx(contour, params.epsilon);
  auto reflex = find_remarkable_points(approx, params.margin_deg);
  if (reflex.size() < 4) return fallback;
  reflex = sharpest(std::move(reflex), 4);
  std::vector<Point> corners;
  for (const auto& r : reflex) corners.push_back(r.point);
  const CrossingDomain domain = crossing_domain(corners, body);
  if (domain.status != CrossingStatus::ok ||
      std::none_of(domain.region.data.begin(), domain.region.data.end(), [](auto v) { return v != 0; }))
    return fallback;

  GeometricResult out{LabelMap(image.height, image.width, 0), true};
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (domain.region.data[i]) out.prediction.data[i] = 3;
    else if (binary.data[i]) out.prediction.data[i] = 1;
  }
  return out;
}

}  // namespace chromseg::baselines
