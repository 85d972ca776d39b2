#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "chromseg/dataset.hpp"
#include "chromseg/geometry.hpp"

// Non-neural comparison methods. Both work on the merged three-class problem
// {0 background, 1 chromosome, 3 overlap}: neither can tell chromosome A from B.
namespace chromseg::baselines {

// Intensities are compared on the 8-bit grid (bins 0..255):
//   v <= low_bin -> background, low_bin < v <= high_bin -> chromosome, else overlap.
struct ThresholdModel {
  int low_bin = 0;
  int high_bin = 1;

  double t_low() const noexcept { return low_bin / 255.0; }
  double t_high() const noexcept { return high_bin / 255.0; }
  bool operator==(const ThresholdModel&) const = default;
};

// Exhaustive search over all 0 <= low_bin < high_bin <= 255 minimising
// three-class pixel error; ties go to the lexicographically smallest pair.
ThresholdModel fit_threshold(const Dataset& train_set);

LabelMap threshold_predict(const ThresholdModel& model, const GrayImage& image);

// Moore-neighbour boundary of the component containing the first foreground
// pixel in raster order, as pixel centres (x = column, y = row), 8-connected,
// counterclockwise on screen, starting at that pixel. A lone pixel yields a
// single-vertex (degenerate) polygon. Throws StructuralError on an empty mask.
Polygon trace_contour(const Mask& mask);

// Douglas-Peucker on an open polyline: endpoints kept, every dropped point lies
// within epsilon of the segment replacing it. epsilon <= 0 returns the input.
std::vector<Point> simplify_polyline(const std::vector<Point>& points, double epsilon);

// Douglas-Peucker on a closed polygon, split at vertex 0 and the vertex
// farthest from it. Output vertices are a subset of the input, in order.
Polygon polygonal_approx(const Polygon& polygon, double epsilon);

struct RemarkablePoint {
  std::size_t index = 0;  // vertex index in the polygon
  Point point;
  double interior_angle_deg = 0.0;
};

// Reflex vertices: interior angle (on the polygon's enclosed side) greater than
// 180 + margin_deg. Returned in polygon order.
std::vector<RemarkablePoint> find_remarkable_points(const Polygon& polygon, double margin_deg = 10.0);

// The `count` vertices with the largest interior angle, back in polygon order.
std::vector<RemarkablePoint> sharpest(std::vector<RemarkablePoint> points, std::size_t count);

enum class CrossingStatus { ok, inapplicable, degenerate };

struct CrossingDomain {
  CrossingStatus status = CrossingStatus::inapplicable;
  Mask region;  // same dims as the input mask; empty unless status == ok
};

// Quadrilateral spanned by four points (ordered by angle about their mean),
// intersected with the mask. A pixel is inside when its centre passes the
// even-odd test or lies within half a pixel of an edge, so corner pixels on
// the quadrilateral's outline are kept.
// Not exactly four points -> inapplicable; near-zero area -> degenerate.
CrossingDomain crossing_domain(const std::vector<Point>& points, const Mask& mask);

using Pairing = std::array<std::array<int, 2>, 2>;

// All perfect matchings of four arms into two pairs:
// {(a,b),(c,d)}, {(a,c),(b,d)}, {(a,d),(b,c)}.
std::array<Pairing, 3> enumerate_pairings(const std::array<int, 4>& arms);

struct GeometricParams {
  double epsilon = 2.0;
  double margin_deg = 10.0;
};

struct GeometricResult {
  LabelMap prediction;  // values in {0, 1, 3}
  bool applicable = false;
};

// Binarise (v > t_low), trace the largest component, simplify, take the four
// sharpest reflex vertices and call their quadrilateral the overlap. When that
// fails the threshold prediction is returned with applicable = false.
GeometricResult geometric_resolve(const GrayImage& image, const ThresholdModel& model,
                                  const GeometricParams& params = {});

}  // namespace chromseg::baselines
