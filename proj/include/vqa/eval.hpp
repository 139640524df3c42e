#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vqa/augment.hpp"
#include "vqa/train.hpp"

namespace vqa {

struct EvalReport {
  int split_index = -1;
  double overall_accuracy = 0;  // percent
  std::map<QuestionType, double> per_type_accuracy;          // percent, types with rows only
  std::map<QuestionType, std::pair<int64_t, int64_t>> counts;  // (correct, total)
  std::optional<AugmentationPlan> plan_echo;

  int64_t total_rows() const;
  int64_t total_correct() const;
  std::string to_json() const;
};

using Scorer = std::function<std::array<double, 5>(const DatasetRow&)>;

// Accuracy over test rows under an arbitrary scorer; the model path wraps
// score_candidates. Rejects non-test rows and rows with augmentation
// provenance, and never mutates its inputs.
EvalReport evaluate_with_scorer(std::span<const DatasetRow> rows, const Scorer& scorer);

EvalReport evaluate(const ModelParams<float>& params, std::span<const DatasetRow> rows,
                    const FeatureStore& store, const EmbeddingTable& table,
                    const ModelConfig& cfg);

// Label-position histograms per question type; positions whose share exceeds
// 25% are flagged as bias candidates.
struct TypeBias {
  PositionHistogram histogram;
  std::array<double, 5> shares = {0, 0, 0, 0, 0};  // percent
  std::vector<int> flagged_positions;
};

struct BiasReport {
  std::map<QuestionType, TypeBias> per_type;
  std::string to_text() const;
  std::string to_json() const;
};

BiasReport bias_report(std::span<const DatasetRow> rows);

// Plain (unweighted) arithmetic mean.
double plain_mean(std::span<const double> values);

// The seven standard augmentation combinations, in presentation order:
// none; +mirror; +resample; +resample+mirror; +hflip; +hflip+resample;
// +hflip+resample+mirror.
std::vector<std::pair<std::string, AugmentationPlan>> standard_plans(uint64_t seed, int copies);

struct MatrixCell {
  std::optional<EvalReport> report;
  std::string error;  // set when the cell failed; partial results are kept
};

struct MatrixRow {
  std::string label;
  AugmentationPlan plan;
  std::vector<MatrixCell> cells;  // one per split
  std::optional<double> avg;      // plain mean over completed cells
};

struct MatrixResult {
  std::vector<MatrixRow> rows;
  int n_splits = 0;
  std::string to_text() const;
  std::string to_csv() const;
  // Per-question-type accuracy with counts pooled across splits.
  std::string per_type_csv() const;
};

// For each (plan, split): partition the base rows, augment the train side,
// train from a fresh seeded initialization, evaluate on the untouched test
// side. Cell failures are recorded and do not abort the rest of the matrix.
MatrixResult run_matrix(std::span<const DatasetRow> base_rows,
                        std::span<const SplitSpec> splits,
                        std::span<const std::pair<std::string, AugmentationPlan>> plans,
                        FeatureStore& store, const EmbeddingTable& table, const ModelConfig& mcfg,
                        const TrainConfig& tcfg);

// Deterministic fallback partitions when no split files are supplied.
std::vector<SplitSpec> auto_splits(std::span<const DatasetRow> rows, int n_splits,
                                   double train_fraction, uint64_t seed);

}  // namespace vqa
