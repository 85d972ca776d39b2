#include "chromseg/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "chromseg/netpbm.hpp"
#include "chromseg/parallel.hpp"

namespace chromseg::datagen {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

template <class T>
double bilinear(const Raster<T>& img, double x, double y) {
  const double fx0 = std::floor(x), fy0 = std::floor(y);
  const int x0 = static_cast<int>(fx0), y0 = static_cast<int>(fy0);
  const double ax = x - fx0, ay = y - fy0;
  auto v = [&](int r, int c) { return static_cast<double>(img.at_or(r, c, T{})); };
  return (1 - ay) * ((1 - ax) * v(y0, x0) + ax * v(y0, x0 + 1)) +
         ay * ((1 - ax) * v(y0 + 1, x0) + ax * v(y0 + 1, x0 + 1));
}

// Reduce to [0, 360) so multiples of 360 give exact sin/cos of 0.
double normalize_degrees(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r < 0) r += 360.0;
  return r;
}

struct Rotation {
  double cos_t;
  double sin_t;
};

Rotation rotation_for(double angle_deg) {
  const double t = normalize_degrees(angle_deg) * kDegToRad;
  return {std::cos(t), std::sin(t)};
}

Point quadratic_bezier(Point p0, Point p1, Point p2, double t) {
  const double u = 1 - t;
  return {u * u * p0.x + 2 * u * t * p1.x + t * t * p2.x, u * u * p0.y + 2 * u * t * p1.y + t * t * p2.y};
}

}  // namespace

GrayImage combine_channels(const GrayImage& dapi, const GrayImage& cy3) {
  if (!dapi.same_dims(cy3)) throw StructuralError("combine_channels: channel dims differ");
  GrayImage out(dapi.height, dapi.width);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = std::max(dapi.data[i], cy3.data[i]);
  return out;
}

GrayImage downscale2x(const GrayImage& img) {
  GrayImage out(img.height / 2, img.width / 2);
  for (int r = 0; r < out.height; ++r)
    for (int c = 0; c < out.width; ++c)
      out(r, c) = (img(2 * r, 2 * c) + img(2 * r, 2 * c + 1) + img(2 * r + 1, 2 * c) + img(2 * r + 1, 2 * c + 1)) *
                  0.25f;
  return out;
}

Mask downscale_mask2x(const Mask& mask) {
  Mask out(mask.height / 2, mask.width / 2);
  for (int r = 0; r < out.height; ++r)
    for (int c = 0; c < out.width; ++c) {
      const int sum = mask(2 * r, 2 * c) + mask(2 * r, 2 * c + 1) + mask(2 * r + 1, 2 * c) + mask(2 * r + 1, 2 * c + 1);
      out(r, c) = sum >= 2 ? 1 : 0;
    }
  return out;
}

Point mask_centroid(const Mask& mask) {
  double sx = 0, sy = 0;
  std::size_t n = 0;
  for (int r = 0; r < mask.height; ++r)
    for (int c = 0; c < mask.width; ++c)
      if (mask(r, c)) {
        sx += c;
        sy += r;
        ++n;
      }
  if (n == 0) throw StructuralError("mask_centroid: empty mask");
  return {sx / static_cast<double>(n), sy / static_cast<double>(n)};
}

std::optional<ChromoImage> place(const ChromoImage& chromo, double angle_deg, Offset offset, int canvas_h,
                                 int canvas_w) {
  if (!chromo.gray.same_dims(chromo.mask)) throw StructuralError("place: gray and mask dims differ");
  const Point c = mask_centroid(chromo.mask);
  const Rotation rot = rotation_for(angle_deg);
  ChromoImage out{GrayImage(canvas_h, canvas_w), Mask(canvas_h, canvas_w), chromo.id};
  bool any = false;
  for (int y = 0; y < canvas_h; ++y) {
    for (int x = 0; x < canvas_w; ++x) {
      // Inverse map: undo the shift, then rotate by -angle about the centroid.
      const double dx = x - offset.dx - c.x;
      const double dy = y - offset.dy - c.y;
      const double sx = c.x + rot.cos_t * dx - rot.sin_t * dy;
      const double sy = c.y + rot.sin_t * dx + rot.cos_t * dy;
      if (bilinear(chromo.mask, sx, sy) >= 0.5) {
        out.mask(y, x) = 1;
        out.gray(y, x) = static_cast<float>(std::clamp(bilinear(chromo.gray, sx, sy), 0.0, 1.0));
        any = true;
      }
    }
  }
  if (!any) return std::nullopt;
  return out;
}

bool fits_on_canvas(const ChromoImage& chromo, double angle_deg, Offset offset, int canvas_h, int canvas_w) {
  const Point c = mask_centroid(chromo.mask);
  const Rotation rot = rotation_for(angle_deg);
  for (int y = 0; y < chromo.mask.height; ++y)
    for (int x = 0; x < chromo.mask.width; ++x) {
      if (!chromo.mask(y, x)) continue;
      const double dx = x - c.x, dy = y - c.y;
      const double qx = c.x + rot.cos_t * dx + rot.sin_t * dy + offset.dx;
      const double qy = c.y - rot.sin_t * dx + rot.cos_t * dy + offset.dy;
      if (qx < 0 || qy < 0 || qx > canvas_w - 1 || qy > canvas_h - 1) return false;
    }
  return true;
}

std::optional<Sample> compose_pair(const ChromoImage& a, const ChromoImage& b, int min_overlap) {
  if (!a.gray.same_dims(b.gray) || !a.mask.same_dims(b.mask) || !a.gray.same_dims(a.mask))
    throw StructuralError("compose_pair: canvas dims differ");
  Sample s{GrayImage(a.gray.height, a.gray.width), LabelMap(a.gray.height, a.gray.width), {}};
  int overlap = 0;
  for (std::size_t i = 0; i < s.image.size(); ++i) {
    s.image.data[i] = (a.gray.data[i] + b.gray.data[i]) / 2.0f;
    const int label = (a.mask.data[i] ? 1 : 0) + (b.mask.data[i] ? 2 : 0);
    s.label.data[i] = static_cast<std::uint8_t>(label);
    overlap += label == 3;
  }
  if (overlap < min_overlap) return std::nullopt;
  s.meta.pair_ids = {a.id, b.id};
  return s;
}

Phantom generate_phantom(Rng& rng, const PhantomParams& p) {
  constexpr int kScale = 2;
  const int H = p.height * kScale, W = p.width * kScale;

  const double length = rng.uniform(p.length_min, p.length_max) * kScale;
  const double half_width = rng.uniform(p.half_width_min, p.half_width_max) * kScale;
  const double phi = rng.uniform(0.0, std::numbers::pi);
  const double bend = rng.uniform(-p.bend_max, p.bend_max);
  const double pinch = rng.uniform(0.0, p.constriction_max);
  const double pinch_at = rng.uniform(0.3, 0.7);
  const double base = rng.uniform(p.interior_min, p.interior_max);
  const double tel_a = rng.uniform(p.telomere_min, p.telomere_max);
  const double tel_b = rng.uniform(p.telomere_min, p.telomere_max);
  struct Wave {
    double kx, ky, phase;
  };
  Wave waves[3];
  for (Wave& w : waves) {
    const double wavelength = rng.uniform(8.0, 20.0) * kScale;
    const double dir = rng.uniform(0.0, 2 * std::numbers::pi);
    w = {std::cos(dir) * 2 * std::numbers::pi / wavelength, std::sin(dir) * 2 * std::numbers::pi / wavelength,
         rng.uniform(0.0, 2 * std::numbers::pi)};
  }

  const Point centre{(W - 1) / 2.0, (H - 1) / 2.0};
  const Point axis{std::cos(phi), std::sin(phi)};
  const Point normal{-axis.y, axis.x};
  const Point p0{centre.x - axis.x * length / 2, centre.y - axis.y * length / 2};
  const Point p2{centre.x + axis.x * length / 2, centre.y + axis.y * length / 2};
  const Point p1{centre.x + normal.x * bend * length, centre.y + normal.y * bend * length};

  const int samples = static_cast<int>(std::ceil(length * (1 + 2 * std::abs(bend)) * 4)) + 2;
  std::vector<Point> spine(samples);
  std::vector<double> radius(samples);
  for (int i = 0; i < samples; ++i) {
    const double t = static_cast<double>(i) / (samples - 1);
    spine[i] = quadratic_bezier(p0, p1, p2, t);
    const double z = (t - pinch_at) / 0.07;
    radius[i] = half_width * (1.0 - pinch * std::exp(-z * z));
  }
  const Point tel_ca = quadratic_bezier(p0, p1, p2, 0.04);
  const Point tel_cb = quadratic_bezier(p0, p1, p2, 0.96);
  const double sigma = 0.8 * half_width;

  double min_x = W, min_y = H, max_x = 0, max_y = 0;
  for (const Point& s : spine) {
    min_x = std::min(min_x, s.x);
    max_x = std::max(max_x, s.x);
    min_y = std::min(min_y, s.y);
    max_y = std::max(max_y, s.y);
  }
  const int pad = static_cast<int>(std::ceil(half_width)) + 2;
  const int x_lo = std::max(0, static_cast<int>(min_x) - pad), x_hi = std::min(W - 1, static_cast<int>(max_x) + pad);
  const int y_lo = std::max(0, static_cast<int>(min_y) - pad), y_hi = std::min(H - 1, static_cast<int>(max_y) + pad);

  GrayImage dapi(H, W), cy3(H, W);
  Mask band(H, W);
  for (int y = y_lo; y <= y_hi; ++y) {
    for (int x = x_lo; x <= x_hi; ++x) {
      double best = 1e300;
      int best_i = 0;
      for (int i = 0; i < samples; ++i) {
        const double dx = x - spine[i].x, dy = y - spine[i].y;
        const double d2 = dx * dx + dy * dy;
        if (d2 < best) {
          best = d2;
          best_i = i;
        }
      }
      const double d = std::sqrt(best);
      if (d > radius[best_i]) continue;
      band(y, x) = 1;
      const double rel = d / radius[best_i];
      double noise = 0;
      for (const Wave& w : waves) noise += std::sin(w.kx * x + w.ky * y + w.phase);
      noise *= p.noise_amplitude / 3.0;
      dapi(y, x) = static_cast<float>(std::clamp(base * (1.0 - p.edge_falloff * rel * rel) + noise, 0.0, 1.0));
      auto spot = [&](Point c, double amp) {
        const double dx = x - c.x, dy = y - c.y;
        return amp * std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      };
      cy3(y, x) = static_cast<float>(std::clamp(std::max(spot(tel_ca, tel_a), spot(tel_cb, tel_b)), 0.0, 1.0));
    }
  }

  const GrayImage merged = combine_channels(dapi, cy3);
  Phantom out;
  out.chromo.mask = largest_component(downscale_mask2x(band));
  out.chromo.gray = downscale2x(merged);
  for (std::size_t i = 0; i < out.chromo.gray.size(); ++i)
    if (!out.chromo.mask.data[i]) out.chromo.gray.data[i] = 0.0f;
  // High-res pixel centre h maps to low-res coordinate (h - 0.5) / 2.
  auto to_low = [](Point q) { return Point{(q.x - 0.5) / 2.0, (q.y - 0.5) / 2.0}; };
  out.tip_a = to_low(p0);
  out.tip_b = to_low(p2);
  out.middle = to_low(quadratic_bezier(p0, p1, p2, 0.5));
  out.half_width = half_width / kScale;
  return out;
}

std::vector<ChromoImage> phantom_library(int count, std::uint64_t seed, const PhantomParams& params) {
  if (count < 2) throw ConfigError("phantom library needs at least 2 chromosomes");
  std::vector<ChromoImage> lib;
  lib.reserve(count);
  auto stratum = [count](double lo, double hi, int j, double& out_lo, double& out_hi) {
    const double span = (hi - lo) / count;
    out_lo = lo + span * j;
    out_hi = out_lo + span;
  };
  for (int j = 0; j < count; ++j) {
    PhantomParams p = params;
    stratum(params.length_min, params.length_max, j, p.length_min, p.length_max);
    stratum(params.half_width_min, params.half_width_max, j, p.half_width_min, p.half_width_max);
    stratum(params.interior_min, params.interior_max, j, p.interior_min, p.interior_max);
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(j)));
    lib.push_back(generate_phantom(rng, p).chromo);
  }
  auto area = [](const ChromoImage& c) { return std::count(c.mask.data.begin(), c.mask.data.end(), 1); };
  std::stable_sort(lib.begin(), lib.end(), [&](const ChromoImage& a, const ChromoImage& b) { return area(a) > area(b); });
  for (int j = 0; j < count; ++j) lib[j].id = j;
  return lib;
}

std::vector<ChromoImage> import_pgm_pairs(const std::filesystem::path& dir, bool halve_resolution) {
  namespace fs = std::filesystem;
  const std::string suffix = "_gray.pgm";
  std::map<std::string, fs::path> grays;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > suffix.size() && name.ends_with(suffix))
      grays.emplace(name.substr(0, name.size() - suffix.size()), entry.path());
  }
  std::vector<ChromoImage> out;
  int next_id = 0;
  for (const auto& [stem, gray_path] : grays) {
    const fs::path mask_path = dir / (stem + "_mask.pgm");
    if (!fs::exists(mask_path)) throw FormatError("missing mask for " + gray_path.string());
    const auto g8 = netpbm::read_pgm(gray_path);
    const auto m8 = netpbm::read_pgm(mask_path);
    if (!g8.same_dims(m8)) throw FormatError("gray/mask dims differ for " + stem);
    ChromoImage c{GrayImage(g8.height, g8.width), Mask(m8.height, m8.width), next_id++};
    for (std::size_t i = 0; i < g8.size(); ++i) {
      c.gray.data[i] = from_byte(g8.data[i]);
      c.mask.data[i] = m8.data[i] ? 1 : 0;
    }
    if (halve_resolution) {
      c.gray = downscale2x(c.gray);
      c.mask = downscale_mask2x(c.mask);
    }
    c.mask = largest_component(c.mask);
    if (std::count(c.mask.data.begin(), c.mask.data.end(), 1) == 0)
      throw FormatError("empty mask for " + stem);
    for (std::size_t i = 0; i < c.gray.size(); ++i)
      if (!c.mask.data[i]) c.gray.data[i] = 0.0f;
    out.push_back(std::move(c));
  }
  return out;
}

std::uint64_t pair_census(std::uint64_t n) { return n < 2 ? 0 : n * (n - 1) / 2; }

std::vector<int> GenConfig::default_angles() {
  std::vector<int> a;
  for (int d = 0; d < 360; d += 15) a.push_back(d);
  return a;
}

void GenConfig::validate() const {
  if (n_samples < 0) throw ConfigError("n_samples must be >= 0");
  if (canvas_h <= 0 || canvas_w <= 0) throw ConfigError("canvas dims must be positive");
  if (angle_set.empty()) throw ConfigError("angle set must not be empty");
  if (max_translation < 0) throw ConfigError("max_translation must be >= 0");
  if (min_overlap < 1) throw ConfigError("min_overlap must be >= 1");
  if (!source_dir && library_size < 2) throw ConfigError("library_size must be >= 2");
}

std::vector<ChromoImage> load_sources(const GenConfig& config) {
  if (config.source_dir) return import_pgm_pairs(*config.source_dir, config.halve_source_resolution);
  return phantom_library(config.library_size, mix_seed(config.seed, 0xC0FFEEULL), config.phantom);
}

Dataset generate_dataset(const GenConfig& config, const std::vector<ChromoImage>& sources, int threads,
                         GenStats* stats) {
  config.validate();
  if (sources.size() < 2) throw ConfigError("need at least two source chromosomes");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < sources.size(); ++i)
    for (std::size_t j = i + 1; j < sources.size(); ++j) pairs.emplace_back(i, j);
  std::vector<Point> centroids;
  for (const auto& s : sources) centroids.push_back(mask_centroid(s.mask));

  const std::size_t n = static_cast<std::size_t>(config.n_samples);
  Dataset ds(n);
  std::vector<std::uint64_t> draws(n, 0);
  const double cx = (config.canvas_w - 1) / 2.0, cy = (config.canvas_h - 1) / 2.0;

  parallel_for(n, threads, [&](std::size_t i) {
    const std::uint64_t sample_seed = mix_seed(config.seed, i);
    auto [ia, ib] = pairs[i % pairs.size()];
    const ChromoImage& a = sources[ia];
    const ChromoImage& b = sources[ib];
    for (std::uint64_t attempt = 0; attempt < kAcceptanceWindow; ++attempt) {
      ++draws[i];
      Rng rng(mix_seed(sample_seed, attempt));
      const int angle_a = config.angle_set[rng.below(config.angle_set.size())];
      const int angle_b = config.angle_set[rng.below(config.angle_set.size())];
      const int dx = static_cast<int>(rng.range(-config.max_translation, config.max_translation));
      const int dy = static_cast<int>(rng.range(-config.max_translation, config.max_translation));
      const Offset off_a{static_cast<int>(std::lround(cx - centroids[ia].x)),
                         static_cast<int>(std::lround(cy - centroids[ia].y))};
      const Offset off_b{static_cast<int>(std::lround(cx - centroids[ib].x)) + dx,
                         static_cast<int>(std::lround(cy - centroids[ib].y)) + dy};
      if (!fits_on_canvas(a, angle_a, off_a, config.canvas_h, config.canvas_w) ||
          !fits_on_canvas(b, angle_b, off_b, config.canvas_h, config.canvas_w))
        continue;
      auto pa = place(a, angle_a, off_a, config.canvas_h, config.canvas_w);
      auto pb = place(b, angle_b, off_b, config.canvas_h, config.canvas_w);
      if (!pa || !pb) continue;
      auto sample = compose_pair(*pa, *pb, config.min_overlap);
      if (!sample) continue;
      quantize(sample->image);
      sample->meta.angles_deg = {angle_a, angle_b};
      sample->meta.offsets = {{{off_a.dx, off_a.dy}, {off_b.dx, off_b.dy}}};
      sample->meta.seed = sample_seed;
      ds[i] = std::move(*sample);
      return;
    }
    throw ConfigError("sample " + std::to_string(i) + ": no overlapping placement in " +
                      std::to_string(kAcceptanceWindow) + " draws; transform ranges make overlap improbable");
  });

  GenStats st;
  for (std::uint64_t d : draws) st.draws += d;
  st.accepted = n;
  if (st.draws >= kAcceptanceWindow && st.accepted * 100 < st.draws)
    throw ConfigError("acceptance rate below 1% (" + std::to_string(st.accepted) + "/" + std::to_string(st.draws) + ")");
  if (stats) *stats = st;
  return ds;
}

}  // namespace chromseg::datagen
