#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chromseg/dataset.hpp"
#include "chromseg/netpbm.hpp"

namespace chromseg::eval {

// confusion[truth][pred] pixel counts.
using Confusion = std::array<std::array<std::uint64_t, 4>, 4>;

// Throws StructuralError on a pred/truth size or dims mismatch, or a value > 3.
Confusion confusion(std::span<const LabelMap> pred, std::span<const LabelMap> truth, int threads = 1);

// |pred=c AND truth=c| / |pred=c OR truth=c| summed over the set;
// nullopt when the union is empty.
std::optional<double> iou(std::span<const LabelMap> pred, std::span<const LabelMap> truth, int class_id);
std::optional<double> iou_from_confusion(const Confusion& m, int class_id);

struct IouReport {
  // Summed intersections over summed unions across the set.
  std::array<std::optional<double>, 4> global{};
  // Mean of per-image IOU; images where the class is absent from both pred
  // and truth are excluded.
  std::array<std::optional<double>, 4> per_image_mean{};
  Confusion confusion{};
  std::size_t images = 0;
  // Labels 1 and 2 were merged into 1 before scoring.
  bool merged = false;
};

IouReport evaluate(std::span<const LabelMap> pred, std::span<const LabelMap> truth, int threads = 1);

// Maps 2 -> 1: the three-class {background, chromosome, overlap} problem.
LabelMap merge_chromosome_classes(const LabelMap& label);
std::vector<LabelMap> merge_chromosome_classes(std::span<const LabelMap> labels);

// Keys: images, merged, iou_global[4], iou_per_image_mean[4] (null where
// undefined), confusion[4][4] (rows = truth, columns = prediction).
nlohmann::json report_json(const IouReport& r);
std::string report_text(const IouReport& r);

struct IntensityHistogram {
  std::array<std::uint64_t, 256> single{};   // labels 1 and 2
  std::array<std::uint64_t, 256> overlap{};  // label 3
};

IntensityHistogram intensity_histogram(const Dataset& ds);
// Fraction of overlap-class pixels whose intensity falls inside
// [min, max] of the non-empty single-class bins. 0 when either is empty.
double overlap_mass_in_single_support(const IntensityHistogram& h);
// "class,bin,count" rows, class in {single, overlap}, all 256 bins each.
std::string histogram_csv(const IntensityHistogram& h);

// Class 0 shows the grey intensity; 1 red, 2 green, 3 blue.
netpbm::RgbImage render_overlay(const GrayImage& image, const LabelMap& label);
void render_overlay(const GrayImage& image, const LabelMap& label, const std::filesystem::path& path);
// Input | truth overlay | prediction overlay, side by side.
netpbm::RgbImage render_triptych(const GrayImage& image, const LabelMap& truth, const LabelMap& pred);

}  // namespace chromseg::eval
