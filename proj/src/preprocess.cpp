#include "chromseg/preprocess.hpp"

#include <array>
#include <numeric>
#include <string>

#include "chromseg/parallel.hpp"
#include "chromseg/rng.hpp"

namespace chromseg::preprocess {

namespace {

constexpr int kDy[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
constexpr int kDx[8] = {-1, 0, 1, -1, 1, -1, 0, 1};

}  // namespace

LabelMap fix_label4(const LabelMap& label) {
  LabelMap out = label;
  for (int r = 0; r < label.height; ++r)
    for (int c = 0; c < label.width; ++c) {
      if (label(r, c) != 4) continue;
      std::array<int, 4> votes{};
      for (int k = 0; k < 8; ++k) {
        const int nr = r + kDy[k], nc = c + kDx[k];
        if (!label.contains(nr, nc)) continue;
        const int v = label(nr, nc);
        if (v <= 3) ++votes[v];
      }
      int best = 0;
      for (int v = 1; v < 4; ++v)
        if (votes[v] > votes[best]) best = v;
      out(r, c) = static_cast<std::uint8_t>(best);
    }
  return out;
}

LabelMap remove_artifacts(const LabelMap& label) {
  LabelMap out = label;
  for (int r = 0; r < label.height; ++r)
    for (int c = 0; c < label.width; ++c) {
      const int v = label(r, c);
      if (v != 1 && v != 2) continue;
      int nonzero = 0;
      for (int k = 0; k < 8; ++k) nonzero += label.at_or(r + kDy[k], c + kDx[k], 0) != 0;
      if (nonzero < 3) out(r, c) = 0;
    }
  return out;
}

Sample crop_center(const Sample& sample) {
  const int h = sample.image.height, w = sample.image.width;
  if (!sample.label.same_dims(sample.image)) throw StructuralError("crop_center: image/label dims differ");
  if (h < kCropSize || w < kCropSize)
    throw StructuralError("crop_center: input " + std::to_string(h) + "x" + std::to_string(w) +
                          " smaller than 88x88");
  const int top = (h - kCropSize) / 2, left = (w - kCropSize) / 2;
  Sample out{GrayImage(kCropSize, kCropSize), LabelMap(kCropSize, kCropSize), sample.meta};
  for (int r = 0; r < kCropSize; ++r)
    for (int c = 0; c < kCropSize; ++c) {
      out.image(r, c) = sample.image(r + top, c + left);
      out.label(r, c) = sample.label(r + top, c + left);
    }
  return out;
}

Sample clean(const Sample& sample) {
  Sample s = sample;
  s.label = remove_artifacts(fix_label4(sample.label));
  return crop_center(s);
}

Dataset clean(const Dataset& ds, int threads) {
  Dataset out(ds.size());
  parallel_for(ds.size(), threads, [&](std::size_t i) { out[i] = clean(ds[i]); });
  return out;
}

SplitIndices split_indices(std::size_t n, const SplitSpec& spec) {
  if (spec.train_percent < 0 || spec.val_percent < 0 || spec.test_percent < 0 ||
      spec.train_percent + spec.val_percent + spec.test_percent != 100)
    throw ConfigError("split fractions must be non-negative and sum to 1");
  if (n < 3) throw ConfigError("split needs at least 3 samples, got " + std::to_string(n));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(spec.seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);

  const std::size_t n_train = n * static_cast<std::size_t>(spec.train_percent) / 100;
  const std::size_t n_val = n * static_cast<std::size_t>(spec.val_percent) / 100;
  SplitIndices out;
  out.train.assign(perm.begin(), perm.begin() + n_train);
  out.val.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
  out.test.assign(perm.begin() + n_train + n_val, perm.end());
  return out;
}

Splits split(const Dataset& ds, const SplitSpec& spec) {
  const SplitIndices idx = split_indices(ds.size(), spec);
  Splits out;
  for (std::size_t i : idx.train) out.train.push_back(ds[i]);
  for (std::size_t i : idx.val) out.val.push_back(ds[i]);
  for (std::size_t i : idx.test) out.test.push_back(ds[i]);
  return out;
}

}  // namespace chromseg::preprocess
