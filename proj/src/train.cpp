#include "chromseg/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "chromseg/evaluation.hpp"
#include "chromseg/rng.hpp"

namespace chromseg::nn {

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (optimizer == Optimizer::adam) {
    if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1)) throw ConfigError("Adam betas must be in (0,1)");
    if (!(epsilon > 0)) throw ConfigError("Adam epsilon must be positive");
  }
  // Zero is allowed: auto weights give a class absent from the data weight 0.
  if (class_weights) {
    for (double w : *class_weights)
      if (!(w >= 0) || !std::isfinite(w)) throw ConfigError("class weights must be finite and non-negative");
    if (std::none_of(class_weights->begin(), class_weights->end(), [](double w) { return w > 0; }))
      throw ConfigError("at least one class weight must be positive");
  }
}

ops::ClassWeights inverse_frequency_weights(const Dataset& ds) {
  std::array<std::uint64_t, 4> counts{};
  for (const Sample& s : ds)
    for (auto v : s.label.data)
      if (v < 4) ++counts[v];
  ops::ClassWeights w{};
  double sum = 0;
  for (int c = 0; c < 4; ++c) {
    w[c] = counts[c] ? 1.0 / static_cast<double>(counts[c]) : 0.0;
    sum += w[c];
  }
  if (sum == 0) return {1, 1, 1, 1};
  for (double& x : w) x *= 4.0 / sum;
  return w;
}

namespace {

struct BatchView {
  std::vector<const GrayImage*> images;
  std::vector<const LabelMap*> labels;
};

BatchView gather(const Dataset& ds, std::span<const std::size_t> idx) {
  BatchView b;
  for (std::size_t i : idx) {
    b.images.push_back(&ds[i].image);
    b.labels.push_back(&ds[i].label);
  }
  return b;
}

void sgd_step(ModelParams<float>& params, const ModelParams<float>& grads, float lr) {
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& p = params.layers[l];
    const auto& g = grads.layers[l];
    for (std::size_t i = 0; i < p.weights.size(); ++i) p.weights[i] -= lr * g.weights[i];
    for (std::size_t i = 0; i < p.bias.size(); ++i) p.bias[i] -= lr * g.bias[i];
  }
}

void adam_update(std::vector<float>& p, const std::vector<float>& g, std::vector<float>& m, std::vector<float>& v,
                 float lr_t, float b1, float b2, float eps, float v_corr) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = b1 * m[i] + (1 - b1) * g[i];
    v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
    p[i] -= lr_t * m[i] / (std::sqrt(v[i] / v_corr) + eps);
  }
}

// lr_t folds in the first-moment bias correction: lr / (1 - beta1^t).
void adam_step(ModelParams<float>& params, const ModelParams<float>& grads, AdamState& st, const TrainConfig& c) {
  ++st.step;
  const double t = static_cast<double>(st.step);
  const float lr_t = static_cast<float>(c.learning_rate / (1.0 - std::pow(c.beta1, t)));
  const float v_corr = static_cast<float>(1.0 - std::pow(c.beta2, t));
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& p = params.layers[l];
    const auto& g = grads.layers[l];
    adam_update(p.weights, g.weights, st.m.layers[l].weights, st.v.layers[l].weights, lr_t,
                static_cast<float>(c.beta1), static_cast<float>(c.beta2), static_cast<float>(c.epsilon), v_corr);
    adam_update(p.bias, g.bias, st.m.layers[l].bias, st.v.layers[l].bias, lr_t, static_cast<float>(c.beta1),
                static_cast<float>(c.beta2), static_cast<float>(c.epsilon), v_corr);
  }
}

struct ValStats {
  double loss = std::numeric_limits<double>::quiet_NaN();
  std::array<double, 4> iou{};
};

ValStats validate_epoch(const NetConfig& config, const ModelParams<float>& params, const Dataset& val,
                        const std::optional<ops::ClassWeights>& weights, int batch_size) {
  ValStats out;
  out.iou.fill(std::numeric_limits<double>::quiet_NaN());
  if (val.empty()) return out;
  eval::Confusion total{};
  double loss_sum = 0;
  for (std::size_t lo = 0; lo < val.size(); lo += batch_size) {
    std::vector<std::size_t> idx(std::min<std::size_t>(batch_size, val.size() - lo));
    std::iota(idx.begin(), idx.end(), lo);
    const BatchView b = gather(val, idx);
    const auto logits = forward(config, params, to_batch(b.images));
    const auto labels = to_label_buffer(b.labels);
    loss_sum += static_cast<double>(ops::softmax_cross_entropy(logits, labels, weights).loss) *
                static_cast<double>(idx.size());
    const auto pred = argmax_labels(logits);
    std::vector<LabelMap> truth;
    for (const auto* l : b.labels) truth.push_back(*l);
    const auto m = eval::confusion(pred, truth);
    for (int a = 0; a < 4; ++a)
      for (int c = 0; c < 4; ++c) total[a][c] += m[a][c];
  }
  out.loss = loss_sum / static_cast<double>(val.size());
  for (int c = 0; c < 4; ++c)
    out.iou[c] = eval::iou_from_confusion(total, c).value_or(std::numeric_limits<double>::quiet_NaN());
  return out;
}

}  // namespace

double dataset_loss(const NetConfig& config, const ModelParams<float>& params, const Dataset& ds,
                    const std::optional<ops::ClassWeights>& class_weights, int batch_size) {
  return validate_epoch(config, params, ds, class_weights, batch_size).loss;
}

TrainResult train(const NetConfig& config, ModelParams<float> params, const Dataset& train_set,
                  const Dataset& val_set, const TrainConfig& tcfg,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  tcfg.validate();
  TrainResult result;
  result.optimizer.m = params.zeros_like();
  result.optimizer.v = params.zeros_like();
  result.params = params;
  if (tcfg.epochs == 0) return result;
  if (train_set.empty()) throw ConfigError("training set is empty");

  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_set.size());
  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(tcfg.seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

    double loss_sum = 0;
    int batch_no = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += tcfg.batch_size, ++batch_no) {
      const auto idx = std::span<const std::size_t>(order).subspan(
          lo, std::min<std::size_t>(tcfg.batch_size, order.size() - lo));
      const BatchView b = gather(train_set, idx);
      const auto labels = to_label_buffer(b.labels);
      const std::string where = " at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_no);
      Gradients<float> g;
      try {
        g = backward(config, params, to_batch(b.images), labels, tcfg.class_weights);
      } catch (const NumericalError& e) {
        throw DivergenceError(epoch, batch_no, "training diverged" + where + ": " + e.what());
      }
      if (!std::isfinite(g.loss)) throw DivergenceError(epoch, batch_no, "training diverged: non-finite loss" + where);
      loss_sum += static_cast<double>(g.loss) * static_cast<double>(idx.size());
      if (tcfg.optimizer == Optimizer::adam)
        adam_step(params, g.grads, result.optimizer, tcfg);
      else
        sgd_step(params, g.grads, static_cast<float>(tcfg.learning_rate));
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_set.size());
    ValStats vs;
    try {
      vs = validate_epoch(config, params, val_set, tcfg.class_weights, tcfg.batch_size);
    } catch (const NumericalError& e) {
      throw DivergenceError(epoch, batch_no, "training diverged during validation at epoch " + std::to_string(epoch) +
                                                 ": " + e.what());
    }
    rec.val_loss = vs.loss;
    rec.val_iou = vs.iou;
    if (!std::isfinite(rec.train_loss))
      throw DivergenceError(epoch, batch_no, "training diverged: non-finite epoch loss at epoch " + std::to_string(epoch));
    const double score = val_set.empty() ? rec.train_loss : rec.val_loss;
    if (score < best) {
      best = score;
      result.params = params;
      result.best_epoch = epoch;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,train_loss,val_loss,val_iou_0,val_iou_1,val_iou_2,val_iou_3\n";
  out.precision(9);
  for (const auto& r : history) {
    out << r.epoch << ',' << r.train_loss << ',' << r.val_loss;
    for (double v : r.val_iou) out << ',' << v;
    out << '\n';
  }
}

}  // namespace chromseg::nn
