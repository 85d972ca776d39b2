#include "chromseg/evaluation.hpp"

#include <cstdio>
#include <sstream>

#include "chromseg/parallel.hpp"

namespace chromseg::eval {

namespace {

void add_counts(const LabelMap& p, const LabelMap& t, Confusion& m) {
  if (!p.same_dims(t)) throw StructuralError("prediction and truth dims differ");
  for (std::size_t i = 0; i < p.size(); ++i) {
    const int a = t.data[i], b = p.data[i];
    if (a > 3 || b > 3) throw StructuralError("label value outside 0..3");
    ++m[a][b];
  }
}

void check_sizes(std::span<const LabelMap> pred, std::span<const LabelMap> truth) {
  if (pred.size() != truth.size())
    throw StructuralError("prediction count " + std::to_string(pred.size()) + " != truth count " +
                          std::to_string(truth.size()));
}

nlohmann::json optional_array(const std::array<std::optional<double>, 4>& v) {
  auto out = nlohmann::json::array();
  for (const auto& x : v) out.push_back(x ? nlohmann::json(*x) : nlohmann::json(nullptr));
  return out;
}

std::string fmt_ratio(const std::optional<double>& v) {
  if (!v) return "     n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%8.4f", *v);
  return buf;
}

}  // namespace

Confusion confusion(std::span<const LabelMap> pred, std::span<const LabelMap> truth, int threads) {
  check_sizes(pred, truth);
  std::vector<Confusion> per(pred.size(), Confusion{});
  parallel_for(pred.size(), threads, [&](std::size_t i) { add_counts(pred[i], truth[i], per[i]); });
  Confusion total{};
  for (const auto& m : per)
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) total[a][b] += m[a][b];
  return total;
}

std::optional<double> iou_from_confusion(const Confusion& m, int c) {
  if (c < 0 || c > 3) throw StructuralError("class id outside 0..3");
  std::uint64_t truth_c = 0, pred_c = 0;
  for (int k = 0; k < 4; ++k) {
    truth_c += m[c][k];
    pred_c += m[k][c];
  }
  const std::uint64_t inter = m[c][c];
  const std::uint64_t uni = truth_c + pred_c - inter;
  if (uni == 0) return std::nullopt;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::optional<double> iou(std::span<const LabelMap> pred, std::span<const LabelMap> truth, int class_id) {
  return iou_from_confusion(confusion(pred, truth), class_id);
}

IouReport evaluate(std::span<const LabelMap> pred, std::span<const LabelMap> truth, int threads) {
  check_sizes(pred, truth);
  std::vector<Confusion> per(pred.size(), Confusion{});
  parallel_for(pred.size(), threads, [&](std::size_t i) { add_counts(pred[i], truth[i], per[i]); });

  IouReport r;
  r.images = pred.size();
  std::array<double, 4> sum{};
  std::array<std::size_t, 4> n{};
  for (const auto& m : per) {
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) r.confusion[a][b] += m[a][b];
    for (int c = 0; c < 4; ++c)
      if (auto v = iou_from_confusion(m, c)) {
        sum[c] += *v;
        ++n[c];
      }
  }
  for (int c = 0; c < 4; ++c) {
    r.global[c] = iou_from_confusion(r.confusion, c);
    if (n[c]) r.per_image_mean[c] = sum[c] / static_cast<double>(n[c]);
  }
  return r;
}

LabelMap merge_chromosome_classes(const LabelMap& label) {
  LabelMap out = label;
  for (auto& v : out.data)
    if (v == 2) v = 1;
  return out;
}

std::vector<LabelMap> merge_chromosome_classes(std::span<const LabelMap> labels) {
  std::vector<LabelMap> out;
  out.reserve(labels.size());
  for (const auto& l : labels) out.push_back(merge_chromosome_classes(l));
  return out;
}

nlohmann::json report_json(const IouReport& r) {
  nlohmann::json j;
  j["images"] = r.images;
  j["merged"] = r.merged;
  j["iou_global"] = optional_array(r.global);
  j["iou_per_image_mean"] = optional_array(r.per_image_mean);
  auto conf = nlohmann::json::array();
  for (const auto& row : r.confusion) conf.push_back(row);
  j["confusion"] = conf;
  return j;
}

std::string report_text(const IouReport& r) {
  static constexpr const char* kFull[4] = {"background", "chromosome A", "chromosome B", "overlap"};
  static constexpr const char* kMerged[4] = {"background", "chromosome", "(unused)", "overlap"};
  const auto& names = r.merged ? kMerged : kFull;
  std::ostringstream os;
  os << "images: " << r.images << "\n";
  os << "class            global   per-image\n";
  for (int c = 0; c < 4; ++c) {
    if (r.merged && c == 2) continue;
    char name[32];
    std::snprintf(name, sizeof name, "%d %-13s", c, names[c]);
    os << name << fmt_ratio(r.global[c]) << "    " << fmt_ratio(r.per_image_mean[c]) << "\n";
  }
  os << "confusion (rows truth, cols pred)\n";
  for (const auto& row : r.confusion) {
    for (auto v : row) {
      char cell[24];
      std::snprintf(cell, sizeof cell, "%12llu", static_cast<unsigned long long>(v));
      os << cell;
    }
    os << "\n";
  }
  return os.str();
}

IntensityHistogram intensity_histogram(const Dataset& ds) {
  IntensityHistogram h;
  for (const Sample& s : ds) {
    if (!s.image.same_dims(s.label)) throw StructuralError("intensity_histogram: image/label dims differ");
    for (std::size_t i = 0; i < s.image.size(); ++i) {
      const auto l = s.label.data[i];
      const auto bin = to_byte(s.image.data[i]);
      if (l == 1 || l == 2) ++h.single[bin];
      else if (l == 3) ++h.overlap[bin];
    }
  }
  return h;
}

double overlap_mass_in_single_support(const IntensityHistogram& h) {
  int lo = -1, hi = -1;
  for (int b = 0; b < 256; ++b)
    if (h.single[b]) {
      if (lo < 0) lo = b;
      hi = b;
    }
  std::uint64_t total = 0, inside = 0;
  for (int b = 0; b < 256; ++b) {
    total += h.overlap[b];
    if (lo >= 0 && b >= lo && b <= hi) inside += h.overlap[b];
  }
  if (lo < 0 || total == 0) return 0.0;
  return static_cast<double>(inside) / static_cast<double>(total);
}

std::string histogram_csv(const IntensityHistogram& h) {
  std::ostringstream os;
  os << "class,bin,count\n";
  for (int b = 0; b < 256; ++b) os << "single," << b << ',' << h.single[b] << '\n';
  for (int b = 0; b < 256; ++b) os << "overlap," << b << ',' << h.overlap[b] << '\n';
  return os.str();
}

netpbm::RgbImage render_overlay(const GrayImage& image, const LabelMap& label) {
  if (!image.same_dims(label)) throw StructuralError("render_overlay: image/label dims differ");
  netpbm::RgbImage out{image.height, image.width, std::vector<std::uint8_t>(image.size() * 3)};
  for (std::size_t i = 0; i < image.size(); ++i) {
    std::uint8_t* px = &out.rgb[3 * i];
    switch (label.data[i]) {
      case 0: px[0] = px[1] = px[2] = to_byte(image.data[i]); break;
      case 1: px[0] = 255; break;
      case 2: px[1] = 255; break;
      case 3: px[2] = 255; break;
      default: throw StructuralError("render_overlay: label value outside 0..3");
    }
  }
  return out;
}

void render_overlay(const GrayImage& image, const LabelMap& label, const std::filesystem::path& path) {
  netpbm::write_ppm(path, render_overlay(image, label));
}

netpbm::RgbImage render_triptych(const GrayImage& image, const LabelMap& truth, const LabelMap& pred) {
  const auto panels = {render_overlay(image, LabelMap(image.height, image.width, 0)), render_overlay(image, truth),
                       render_overlay(image, pred)};
  const int gap = 2;
  netpbm::RgbImage out{image.height, 3 * image.width + 2 * gap,
                       std::vector<std::uint8_t>(static_cast<std::size_t>(image.height) * (3 * image.width + 2 * gap) * 3, 0)};
  int x0 = 0;
  for (const auto& p : panels) {
    for (int r = 0; r < image.height; ++r)
      std::copy_n(&p.rgb[static_cast<std::size_t>(r) * image.width * 3], image.width * 3,
                  &out.rgb[(static_cast<std::size_t>(r) * out.width + x0) * 3]);
    x0 += image.width + gap;
  }
  return out;
}

}  // namespace chromseg::eval
