#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "chromseg/dataset.hpp"
#include "chromseg/network.hpp"

namespace chromseg::nn {

enum class Optimizer { sgd, adam };

struct TrainConfig {
  int epochs = 30;
  int batch_size = 8;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::optional<ops::ClassWeights> class_weights;
  std::uint64_t seed = 0;

  void validate() const;
};

// w_c proportional to 1 / (pixel count of class c), scaled so the four weights
// average 1. A class with no pixels gets weight 0 before scaling.
ops::ClassWeights inverse_frequency_weights(const Dataset& ds);

struct AdamState {
  ModelParams<float> m;
  ModelParams<float> v;
  std::uint64_t step = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  // Global IOU per class on the validation set; NaN where undefined.
  std::array<double, 4> val_iou{};
};

struct TrainResult {
  ModelParams<float> params;  // from the epoch with the lowest validation loss
  std::vector<EpochRecord> history;
  AdamState optimizer;        // state at the end of the last epoch
  int best_epoch = -1;
};

// Mini-batch training. Epoch e visits samples in a Fisher-Yates order drawn
// from mix(seed, e). With an empty validation set the training loss drives
// model selection. Throws DivergenceError on a non-finite batch loss.
TrainResult train(const NetConfig& config, ModelParams<float> params, const Dataset& train_set,
                  const Dataset& val_set, const TrainConfig& tcfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

// Mean loss over a dataset, evaluated in batches of `batch_size`.
double dataset_loss(const NetConfig& config, const ModelParams<float>& params, const Dataset& ds,
                    const std::optional<ops::ClassWeights>& class_weights, int batch_size = 8);

// "epoch,train_loss,val_loss,val_iou_0,...,val_iou_3"
void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

}  // namespace chromseg::nn
