#pragma once

#include <cstdint>
#include <vector>

#include "chromseg/dataset.hpp"

namespace chromseg::preprocess {

// Replaces every 4 with the majority label among its 8 neighbours that are in
// 0..3; ties go to the smaller label and a 4 with no valid neighbour becomes 0.
// Neighbours are read from the input, so the result is order-independent.
LabelMap fix_label4(const LabelMap& label);

// One simultaneous pass: a pixel labelled 1 or 2 with fewer than 3 nonzero
// 8-neighbours in the input becomes background. 0 and 3 never change.
LabelMap remove_artifacts(const LabelMap& label);

inline constexpr int kCropSize = 88;

// Centre crop to 88x88; offsets floor((h-88)/2), floor((w-88)/2).
Sample crop_center(const Sample& sample);

// fix_label4 -> remove_artifacts -> crop_center.
Sample clean(const Sample& sample);
Dataset clean(const Dataset& ds, int threads = 1);

struct SplitSpec {
  // Percentages, summing to exactly 100.
  int train_percent = 64;
  int val_percent = 16;
  int test_percent = 20;
  std::uint64_t seed = 0;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Seeded Fisher-Yates permutation of [0, n); train takes floor(0.64 n),
// val floor(0.16 n), test the remainder. n < 3 is a ConfigError.
SplitIndices split_indices(std::size_t n, const SplitSpec& spec);

struct Splits {
  Dataset train;
  Dataset val;
  Dataset test;
};
Splits split(const Dataset& ds, const SplitSpec& spec);

}  // namespace chromseg::preprocess
