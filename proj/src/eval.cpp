#include "vqa/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace vqa {

using nlohmann::json;

int64_t EvalReport::total_rows() const {
  int64_t n = 0;
  for (const auto& [t, ct] : counts) n += ct.second;
  return n;
}

int64_t EvalReport::total_correct() const {
  int64_t n = 0;
  for (const auto& [t, ct] : counts) n += ct.first;
  return n;
}

namespace {

json plan_to_json(const AugmentationPlan& plan) {
  json j;
  j["enable_hflip"] = plan.enable_hflip;
  j["enable_resample"] = plan.enable_resample;
  j["resample_copies"] = plan.resample_copies;
  j["enable_mirror"] = plan.enable_mirror;
  j["seed"] = plan.seed;
  json lex = json::array();
  for (const auto& [a, b] : plan.lr_lexicon) lex.push_back({a, b});
  j["lr_lexicon"] = lex;
  return j;
}

}  // namespace

std::string EvalReport::to_json() const {
  json j;
  j["split_index"] = split_index;
  j["overall_accuracy"] = overall_accuracy;
  json per_type = json::object();
  for (const auto& [t, acc] : per_type_accuracy) per_type[to_string(t)] = acc;
  j["per_type_accuracy"] = per_type;
  json cnt = json::object();
  for (const auto& [t, ct] : counts)
    cnt[to_string(t)] = {{"correct", ct.first}, {"total", ct.second}};
  j["counts"] = cnt;
  if (plan_echo) j["augmentation_plan"] = plan_to_json(*plan_echo);
  return j.dump(2);
}

EvalReport evaluate_with_scorer(std::span<const DatasetRow> rows, const Scorer& scorer) {
  for (const auto& row : rows) {
    if (row.split != Split::Test)
      throw validation_error("evaluate: row \"" + row.row_id + "\" is not test-split");
    if (!row.is_original())
      throw validation_error("evaluate: row \"" + row.row_id +
                             "\" carries augmentation provenance; test rows must be original");
  }
  EvalReport report;
  for (const auto& row : rows) {
    const auto scores = scorer(row);
    const bool correct = predict(scores) == row.label;
    auto& ct = report.counts[row.qtype];
    ct.first += correct ? 1 : 0;
    ct.second += 1;
  }
  for (const auto& [t, ct] : report.counts) {
    report.per_type_accuracy[t] = 100.0 * double(ct.first) / double(ct.second);
  }
  report.overall_accuracy =
      rows.empty() ? 0.0 : 100.0 * double(report.total_correct()) / double(report.total_rows());
  return report;
}

EvalReport evaluate(const ModelParams<float>& params, std::span<const DatasetRow> rows,
                    const FeatureStore& store, const EmbeddingTable& table,
                    const ModelConfig& cfg) {
  return evaluate_with_scorer(rows, [&](const DatasetRow& row) {
    const auto s = score_candidates<float>(row, store, table, params, cfg);
    std::array<double, 5> out;
    for (int i = 0; i < 5; ++i) out[size_t(i)] = double(s[size_t(i)]);
    return out;
  });
}

BiasReport bias_report(std::span<const DatasetRow> rows) {
  BiasReport report;
  for (QuestionType t : kQuestionTypes) {
    TypeBias tb;
    tb.histogram = label_position_histogram(rows, t);
    if (tb.histogram.total > 0) {
      for (int p = 0; p < 5; ++p) {
        tb.shares[size_t(p)] =
            100.0 * double(tb.histogram.counts[size_t(p)]) / double(tb.histogram.total);
        if (tb.shares[size_t(p)] > 25.0) tb.flagged_positions.push_back(p);
      }
    }
    report.per_type[t] = tb;
  }
  return report;
}

std::string BiasReport::to_text() const {
  std::ostringstream out;
  out << "label-position histogram per question type (share > 25% flagged)\n";
  out << std::left << std::setw(8) << "type";
  for (int p = 0; p < 5; ++p) out << std::right << std::setw(7) << ("pos" + std::to_string(p));
  out << std::setw(7) << "total" << "  flags\n";
  for (const auto& [t, tb] : per_type) {
    out << std::left << std::setw(8) << to_string(t);
    for (int p = 0; p < 5; ++p) out << std::right << std::setw(7) << tb.histogram.counts[size_t(p)];
    out << std::setw(7) << tb.histogram.total << "  ";
    for (size_t i = 0; i < tb.flagged_positions.size(); ++i) {
      if (i) out << ",";
      const int p = tb.flagged_positions[i];
      out << "pos" << p << "=" << std::fixed << std::setprecision(2) << tb.shares[size_t(p)]
          << "%";
    }
    out << "\n";
  }
  return out.str();
}

std::string BiasReport::to_json() const {
  json j = json::object();
  for (const auto& [t, tb] : per_type) {
    json jt;
    jt["counts"] = tb.histogram.counts;
    jt["total"] = tb.histogram.total;
    jt["shares_percent"] = tb.shares;
    jt["flagged_positions"] = tb.flagged_positions;
    j[to_string(t)] = jt;
  }
  return j.dump(2);
}

double plain_mean(std::span<const double> values) {
  if (values.empty()) throw validation_error("plain_mean: empty input");
  return std::accumulate(values.begin(), values.end(), 0.0) / double(values.size());
}

std::vector<std::pair<std::string, AugmentationPlan>> standard_plans(uint64_t seed, int copies) {
  auto plan = [&](bool hflip, bool resample, bool mirror) {
    AugmentationPlan p;
    p.enable_hflip = hflip;
    p.enable_resample = resample;
    p.resample_copies = resample ? copies : 0;
    p.enable_mirror = mirror;
    p.seed = seed;
    return p;
  };
  return {
      {"none", plan(false, false, false)},
      {"+mirror", plan(false, false, true)},
      {"+resample", plan(false, true, false)},
      {"+resample+mirror", plan(false, true, true)},
      {"+hflip", plan(true, false, false)},
      {"+hflip+resample", plan(true, true, false)},
      {"+hflip+resample+mirror", plan(true, true, true)},
  };
}

MatrixResult run_matrix(std::span<const DatasetRow> base_rows, std::span<const SplitSpec> splits,
                        std::span<const std::pair<std::string, AugmentationPlan>> plans,
                        FeatureStore& store, const EmbeddingTable& table, const ModelConfig& mcfg,
                        const TrainConfig& tcfg) {
  if (plans.empty()) throw validation_error("run_matrix: no augmentation plans given");
  if (splits.empty()) throw validation_error("run_matrix: no splits given");
  MatrixResult result;
  result.n_splits = int(splits.size());
  for (const auto& [label, plan] : plans) {
    MatrixRow mr;
    mr.label = label;
    mr.plan = plan;
    std::vector<double> accs;
    for (const auto& split : splits) {
      MatrixCell cell;
      try {
        auto [train_rows, test_rows] = apply_split(base_rows, split);
        const PoolMap pools = build_pools(train_rows);
        AugmentResult aug = augment_split(train_rows, pools, store, plan);
        std::vector<DatasetRow> all = std::move(aug.rows);
        all.insert(all.end(), test_rows.begin(), test_rows.end());
        // Fresh initialization per cell, derived from the base train seed.
        TrainConfig cell_cfg = tcfg;
        cell_cfg.seed = stream_seed(
            tcfg.seed, "cell/" + std::to_string(split.split_index) + "/" + label);
        TrainResult tr = train(all, store, table, mcfg, cell_cfg);
        EvalReport report = evaluate(tr.params, test_rows, store, table, mcfg);
        report.split_index = split.split_index;
        report.plan_echo = plan;
        accs.push_back(report.overall_accuracy);
        cell.report = std::move(report);
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      mr.cells.push_back(std::move(cell));
    }
    if (!accs.empty()) mr.avg = plain_mean(accs);
    result.rows.push_back(std::move(mr));
  }
  return result;
}

std::string MatrixResult::to_text() const {
  std::ostringstream out;
  size_t label_w = 12;
  for (const auto& r : rows) label_w = std::max(label_w, r.label.size());
  out << std::left << std::setw(int(label_w) + 2) << "augmentation";
  for (int s = 0; s < n_splits; ++s)
    out << std::right << std::setw(9) << ("split" + std::to_string(s));
  out << std::right << std::setw(9) << "avg" << "\n";
  out << std::fixed << std::setprecision(2);
  for (const auto& r : rows) {
    out << std::left << std::setw(int(label_w) + 2) << r.label;
    for (const auto& c : r.cells) {
      if (c.report)
        out << std::right << std::setw(9) << c.report->overall_accuracy;
      else
        out << std::right << std::setw(9) << "-";
    }
    if (r.avg)
      out << std::right << std::setw(9) << *r.avg;
    else
      out << std::right << std::setw(9) << "-";
    out << "\n";
  }
  return out.str();
}

std::string MatrixResult::to_csv() const {
  std::ostringstream out;
  out << "augmentation";
  for (int s = 0; s < n_splits; ++s) out << ",split" << s;
  out << ",avg\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    out << r.label;
    for (const auto& c : r.cells) {
      out << ",";
      if (c.report) out << c.report->overall_accuracy;
    }
    out << ",";
    if (r.avg) out << *r.avg;
    out << "\n";
  }
  return out.str();
}

std::string MatrixResult::per_type_csv() const {
  std::ostringstream out;
  out << "augmentation";
  for (QuestionType t : kQuestionTypes) out << "," << to_string(t);
  out << "\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    out << r.label;
    std::map<QuestionType, std::pair<int64_t, int64_t>> pooled;
    for (const auto& c : r.cells) {
      if (!c.report) continue;
      for (const auto& [t, ct] : c.report->counts) {
        pooled[t].first += ct.first;
        pooled[t].second += ct.second;
      }
    }
    for (QuestionType t : kQuestionTypes) {
      out << ",";
      auto it = pooled.find(t);
      if (it != pooled.end() && it->second.second > 0)
        out << 100.0 * double(it->second.first) / double(it->second.second);
    }
    out << "\n";
  }
  return out.str();
}

std::vector<SplitSpec> auto_splits(std::span<const DatasetRow> rows, int n_splits,
                                   double train_fraction, uint64_t seed) {
  if (n_splits < 1) throw validation_error("auto_splits: need at least one split");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw validation_error("auto_splits: train_fraction must be in (0,1)");
  std::vector<SplitSpec> specs;
  for (int s = 0; s < n_splits; ++s) {
    std::vector<std::string> ids;
    ids.reserve(rows.size());
    for (const auto& row : rows) ids.push_back(row.row_id);
    Rng rng(stream_seed(seed, "auto-split/" + std::to_string(s)));
    rng.shuffle(ids);
    const size_t n_train = size_t(double(ids.size()) * train_fraction);
    SplitSpec spec;
    spec.split_index = s;
    spec.train_ids.assign(ids.begin(), ids.begin() + ptrdiff_t(n_train));
    spec.test_ids.assign(ids.begin() + ptrdiff_t(n_train), ids.end());
    validate_split_spec(spec);
    specs.push_back(std::move(spec));
  }
  return specs;
}

}  // namespace vqa
