#include "vqa/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "json.hpp"

namespace vqa {

using nlohmann::json;

void validate_train_config(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0)) throw validation_error("train config: learning_rate must be > 0");
  if (cfg.batch_size < 1) throw validation_error("train config: batch_size must be >= 1");
  if (cfg.epochs < 0) throw validation_error("train config: epochs must be >= 0");
}

AdamState make_adam_state(const ModelParams<float>& params) {
  AdamState state;
  for (const auto& [name, m] : params.tensors()) {
    state.m.emplace_back(m->rows(), m->cols());
    state.v.emplace_back(m->rows(), m->cols());
  }
  return state;
}

void adam_update_tensor(Matrix<float>& param, const Matrix<float>& grad, Matrix<float>& m,
                        Matrix<float>& v, int64_t step, const TrainConfig& cfg) {
  const float b1 = float(cfg.beta1), b2 = float(cfg.beta2);
  const float bc1 = 1.0f - std::pow(b1, float(step));
  const float bc2 = 1.0f - std::pow(b2, float(step));
  for (size_t i = 0; i < param.size(); ++i) {
    const float g = grad.data()[i];
    m.data()[i] = b1 * m.data()[i] + (1.0f - b1) * g;
    v.data()[i] = b2 * v.data()[i] + (1.0f - b2) * g * g;
    const float m_hat = m.data()[i] / bc1;
    const float v_hat = v.data()[i] / bc2;
    param.data()[i] -= float(cfg.learning_rate) * m_hat / (std::sqrt(v_hat) + float(cfg.adam_eps));
  }
}

void adam_step(ModelParams<float>& params, const std::vector<Matrix<float>>& grads,
               AdamState& state, const TrainConfig& cfg) {
  auto tensors = params.tensors();
  if (grads.size() != tensors.size())
    throw numeric_error("adam_step: gradient count does not match parameter count");
  state.step += 1;
  for (size_t i = 0; i < tensors.size(); ++i) {
    if (!grads[i].all_finite())
      throw numeric_error("adam_step: non-finite gradient for tensor \"" + tensors[i].first +
                          "\"");
    if (!grads[i].same_shape(*tensors[i].second))
      throw numeric_error("adam_step: gradient shape mismatch for tensor \"" + tensors[i].first +
                          "\"");
    adam_update_tensor(*tensors[i].second, grads[i], state.m[i], state.v[i], state.step, cfg);
  }
}

std::string metrics_to_json_line(const EpochMetrics& m) {
  json j;
  j["epoch"] = m.epoch;
  j["train_loss"] = m.train_loss;
  j["train_acc"] = m.train_acc;
  if (std::isfinite(m.test_acc))
    j["test_acc"] = m.test_acc;
  else
    j["test_acc"] = nullptr;
  j["wallclock_s"] = m.wallclock_s;
  return j.dump();
}

namespace {

double accuracy(std::span<const DatasetRow> rows, const FeatureStore& store,
                const EmbeddingTable& table, const ModelParams<float>& params,
                const ModelConfig& cfg) {
  if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
  int64_t correct = 0;
  for (const auto& row : rows) {
    const auto scores = score_candidates<float>(row, store, table, params, cfg);
    if (predict(scores) == row.label) ++correct;
  }
  return double(correct) / double(rows.size());
}

}  // namespace

TrainResult train(std::span<const DatasetRow> rows, const FeatureStore& store,
                  const EmbeddingTable& table, const ModelConfig& mcfg, const TrainConfig& tcfg,
                  std::ostream* metrics_jsonl) {
  validate_config(mcfg);
  validate_train_config(tcfg);

  std::vector<DatasetRow> train_rows, test_rows;
  for (const auto& row : rows)
    (row.split == Split::Train ? train_rows : test_rows).push_back(row);
  if (train_rows.empty()) throw validation_error("train: no train-split rows");

  TrainResult result;
  result.params = init_params<float>(mcfg, tcfg.seed);
  ModelParams<float> current = result.params;
  AdamState state = make_adam_state(current);
  const bool have_test = !test_rows.empty();
  result.best_metric = -1.0;
  result.best_epoch = 0;

  std::vector<size_t> order(train_rows.size());
  std::iota(order.begin(), order.end(), size_t(0));

  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng shuffle_rng(stream_seed(tcfg.seed, "shuffle/" + std::to_string(epoch)));
    std::iota(order.begin(), order.end(), size_t(0));
    shuffle_rng.shuffle(order);

    double loss_sum = 0;
    for (size_t start = 0; start < order.size(); start += size_t(tcfg.batch_size)) {
      const size_t stop = std::min(order.size(), start + size_t(tcfg.batch_size));
      Tape<float> tape;
      auto lifted = lift_params(tape, current, true);
      std::optional<Tape<float>::Var> total;
      for (size_t k = start; k < stop; ++k) {
        const DatasetRow& row = train_rows[order[k]];
        Matrix<float> phi_am = video_input<float>(store.load(row.clip_id), mcfg);
        auto scores = score_candidates_graph(tape, lifted.vars, row, phi_am, table, mcfg);
        auto loss = hinge_loss_graph(tape, scores, row.label);
        total = total ? tape.add(*total, loss) : loss;
      }
      // Gradients averaged over the questions in the batch.
      auto batch_loss = tape.scale(*total, 1.0f / float(stop - start));
      const double loss_value = tape.value(batch_loss)(0, 0);
      if (!std::isfinite(loss_value)) {
        result.diverged = true;
        if (metrics_jsonl) metrics_jsonl->flush();
        return result;  // params hold the last good checkpoint
      }
      loss_sum += loss_value * double(stop - start);
      tape.backward(batch_loss);
      std::vector<Matrix<float>> grads;
      grads.reserve(lifted.by_name.size());
      for (const auto& [name, var] : lifted.by_name) grads.push_back(tape.grad(var));
      adam_step(current, grads, state, tcfg);
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / double(train_rows.size());
    m.train_acc = accuracy(train_rows, store, table, current, mcfg);
    m.test_acc = have_test ? accuracy(test_rows, store, table, current, mcfg)
                           : std::numeric_limits<double>::quiet_NaN();
    m.wallclock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(m);
    if (metrics_jsonl) (*metrics_jsonl) << metrics_to_json_line(m) << '\n';

    const double metric = have_test ? m.test_acc : m.train_acc;
    if (metric > result.best_metric) {
      result.best_metric = metric;
      result.best_epoch = epoch;
      result.params = current;
    }
  }
  if (metrics_jsonl) metrics_jsonl->flush();
  if (tcfg.epochs == 0) result.params = current;
  return result;
}

}  // namespace vqa
