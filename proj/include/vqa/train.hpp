#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "vqa/augment.hpp"
#include "vqa/model.hpp"

namespace vqa {

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 8;
  int epochs = 50;
  uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

void validate_train_config(const TrainConfig& cfg);

// Pairwise ranking loss: sum over wrong candidates of max(0, 1 + s_c - s_r).
template <typename T>
T hinge_loss(const std::array<T, 5>& scores, int correct) {
  if (correct < 0 || correct > 4) throw validation_error("hinge_loss: correct index out of range");
  T total = T(0);
  for (int c = 0; c < 5; ++c) {
    if (c == correct) continue;
    total += std::max(T(0), T(1) + scores[size_t(c)] - scores[size_t(correct)]);
  }
  return total;
}

// Same loss as a tape node over five 1×1 score vars.
template <typename T>
typename Tape<T>::Var hinge_loss_graph(Tape<T>& t,
                                       const std::array<typename Tape<T>::Var, 5>& scores,
                                       int correct) {
  std::optional<typename Tape<T>::Var> total;
  for (int c = 0; c < 5; ++c) {
    if (c == correct) continue;
    auto term = t.relu(t.add_const(t.sub(scores[size_t(c)], scores[size_t(correct)]), T(1)));
    total = total ? t.add(*total, term) : term;
  }
  return *total;
}

// Adam moments per tensor, tensors() order.
struct AdamState {
  std::vector<Matrix<float>> m;
  std::vector<Matrix<float>> v;
  int64_t step = 0;
};

AdamState make_adam_state(const ModelParams<float>& params);

// Standard biased-moment update with bias correction on one tensor.
void adam_update_tensor(Matrix<float>& param, const Matrix<float>& grad, Matrix<float>& m,
                        Matrix<float>& v, int64_t step, const TrainConfig& cfg);

// Applies one Adam step to every tensor; grads are in tensors() order.
// Non-finite gradients abort with a diagnostic naming the tensor.
void adam_step(ModelParams<float>& params, const std::vector<Matrix<float>>& grads,
               AdamState& state, const TrainConfig& cfg);

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0;
  double train_acc = 0;
  double test_acc = 0;  // NaN when the input has no test rows
  double wallclock_s = 0;
};

std::string metrics_to_json_line(const EpochMetrics& m);

struct TrainResult {
  ModelParams<float> params;  // best checkpoint (see below)
  std::vector<EpochMetrics> log;
  int best_epoch = 0;        // 0 = initial parameters
  double best_metric = 0;    // test accuracy, or train accuracy when no test rows
  bool diverged = false;     // non-finite loss hit; params hold the last good checkpoint
};

// Seeded-shuffle minibatch training with the pairwise hinge loss, gradients
// averaged over the questions in a batch. Rows carry their split: train rows
// are fitted, test rows only scored for the per-epoch metric. Returns the
// best-test-accuracy checkpoint (best train accuracy when no test rows are
// present). Any augmentation must have been applied to the rows beforehand.
TrainResult train(std::span<const DatasetRow> rows, const FeatureStore& store,
                  const EmbeddingTable& table, const ModelConfig& mcfg, const TrainConfig& tcfg,
                  std::ostream* metrics_jsonl = nullptr);

}  // namespace vqa
