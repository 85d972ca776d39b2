#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "chromseg/dataset.hpp"
#include "chromseg/geometry.hpp"
#include "chromseg/raster.hpp"
#include "chromseg/rng.hpp"

// Semi-synthetic overlapping-chromosome data: single chromosomes are rotated,
// translated against each other, averaged, and labelled by mask sum.
namespace chromseg::datagen {

// A single isolated chromosome. gray is zero wherever mask is zero.
struct ChromoImage {
  GrayImage gray;
  Mask mask;
  int id = 0;
};

struct Offset {
  int dx = 0;
  int dy = 0;
};

// Per-pixel maximum of the chromosome-body and telomere-probe channels.
GrayImage combine_channels(const GrayImage& dapi, const GrayImage& cy3);

// Mean of each 2x2 block; an odd trailing row/column is dropped.
GrayImage downscale2x(const GrayImage& img);
// Block mean thresholded at >= 0.5.
Mask downscale_mask2x(const Mask& mask);

// Mask centroid (x = column, y = row).
Point mask_centroid(const Mask& mask);

// Rotates the chromosome by `angle_deg` (counterclockwise on screen) about its
// mask centroid, then shifts it by `offset`, onto a canvas_h x canvas_w raster.
// Source and canvas share their top-left origin. Gray and mask use bilinear
// sampling; the mask is re-thresholded at >= 0.5 and gray is zeroed outside it.
// Returns nullopt when nothing of the chromosome lands on the canvas.
std::optional<ChromoImage> place(const ChromoImage& chromo, double angle_deg, Offset offset,
                                 int canvas_h, int canvas_w);

// True when every rotated+shifted mask pixel centre lies on the canvas.
bool fits_on_canvas(const ChromoImage& chromo, double angle_deg, Offset offset, int canvas_h,
                    int canvas_w);

// Averages the two grey images and sums masks as 1*a + 2*b, so overlap is 3.
// Returns nullopt when fewer than min_overlap pixels overlap.
std::optional<Sample> compose_pair(const ChromoImage& a, const ChromoImage& b, int min_overlap);

struct PhantomParams {
  int height = 94;
  int width = 93;
  double length_min = 24.0;  // spine end-to-end distance, output pixels
  double length_max = 58.0;
  double half_width_min = 2.6;
  double half_width_max = 3.6;
  double bend_max = 0.3;          // control-point offset as a fraction of length
  double constriction_max = 0.3;  // centromere narrowing, fraction of half-width
  double interior_min = 0.4;
  double interior_max = 0.7;
  double telomere_min = 0.9;
  double telomere_max = 1.0;
  double noise_amplitude = 0.05;
  double edge_falloff = 0.15;
};

struct Phantom {
  ChromoImage chromo;
  Point tip_a;
  Point tip_b;
  Point middle;
  double half_width = 0.0;
};

// Draws a band around a random quadratic Bezier spine at twice the output
// resolution, with a body channel and bright telomere spots at both ends,
// merges the channels and halves the resolution. The mask is a single
// 4-connected component.
Phantom generate_phantom(Rng& rng, const PhantomParams& params);

// k phantoms whose length, half-width and interior intensity are stratified
// together over their ranges, so bigger chromosomes are also brighter. Sorted
// by area, largest first, and numbered 0..k-1 in that order.
std::vector<ChromoImage> phantom_library(int count, std::uint64_t seed, const PhantomParams& params);

// Loads `<id>_gray.pgm` / `<id>_mask.pgm` pairs (mask: nonzero = chromosome).
// Ids are assigned 0..k-1 in lexicographic order of `<id>`.
std::vector<ChromoImage> import_pgm_pairs(const std::filesystem::path& dir, bool halve_resolution);

// C(n, 2).
std::uint64_t pair_census(std::uint64_t n);

struct GenConfig {
  int n_samples = 13000;
  int canvas_h = 94;
  int canvas_w = 93;
  std::vector<int> angle_set = default_angles();
  int max_translation = 12;
  int min_overlap = 1;
  std::uint64_t seed = 0;
  int library_size = 12;
  PhantomParams phantom{};
  std::optional<std::filesystem::path> source_dir;
  bool halve_source_resolution = false;

  // Multiples of 15 degrees in [0, 360).
  static std::vector<int> default_angles();
  void validate() const;
};

struct GenStats {
  std::uint64_t draws = 0;
  std::uint64_t accepted = 0;
};

// Draw budget for one sample; exhausting it, or an overall acceptance rate
// below 1% once at least this many draws were made, is a ConfigError.
inline constexpr std::uint64_t kAcceptanceWindow = 10000;

// Sample i uses source pair i mod C(k,2) (pairs in lexicographic id order; the
// lower id is labelled 1) and seed mix(config.seed, i); attempt j of sample i
// draws from mix(mix(config.seed, i), j). Output is independent of `threads`.
Dataset generate_dataset(const GenConfig& config, const std::vector<ChromoImage>& sources,
                         int threads = 1, GenStats* stats = nullptr);

// Builds sources from config.source_dir, or a phantom library otherwise.
std::vector<ChromoImage> load_sources(const GenConfig& config);

}  // namespace chromseg::datagen
