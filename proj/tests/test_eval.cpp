#include <algorithm>

#include "doctest.h"
#include "synth.hpp"
#include "vqa/eval.hpp"

using namespace vqa;

namespace {

std::vector<DatasetRow> test_rows(int n, uint64_t seed) {
  return testutil::synth_rows(
      {.rows = n, .vocab_size = 18, .seed = seed, .split = Split::Test, .id_prefix = "t"});
}

Scorer perfect_scorer() {
  return [](const DatasetRow& row) {
    std::array<double, 5> s{};
    s[size_t(row.label)] = 1.0;
    return s;
  };
}

}  // namespace

TEST_CASE("evaluate: perfect scorer gives 100% overall and per type") {
  const auto rows = test_rows(40, 3);
  const auto report = evaluate_with_scorer(rows, perfect_scorer());
  CHECK(report.overall_accuracy == doctest::Approx(100.0));
  for (const auto& [t, acc] : report.per_type_accuracy) CHECK(acc == doctest::Approx(100.0));
  CHECK(report.total_rows() == 40);
  CHECK(report.total_correct() == 40);
}

TEST_CASE("evaluate: counts sum to the overall figures") {
  const auto rows = test_rows(60, 4);
  Rng rng(9);
  const auto report = evaluate_with_scorer(rows, [&](const DatasetRow&) {
    std::array<double, 5> s;
    for (auto& v : s) v = rng.uniform();
    return s;
  });
  CHECK(report.total_rows() == 60);
  CHECK(report.overall_accuracy ==
        doctest::Approx(100.0 * double(report.total_correct()) / 60.0));
}

TEST_CASE("evaluate rejects train rows and augmented provenance") {
  auto rows = test_rows(4, 5);
  SUBCASE("train row") {
    rows[1].split = Split::Train;
    CHECK_THROWS_WITH_AS(evaluate_with_scorer(rows, perfect_scorer()),
                         doctest::Contains("not test-split"), validation_error);
  }
  SUBCASE("augmented row") {
    rows[2].provenance.push_back(Provenance::Mirrored);
    CHECK_THROWS_WITH_AS(evaluate_with_scorer(rows, perfect_scorer()),
                         doctest::Contains("provenance"), validation_error);
  }
}

TEST_CASE("evaluate: invariant under row order, inputs never mutated") {
  auto rows = test_rows(30, 6);
  const auto before = rows;
  ModelConfig cfg;
  cfg.embed_dim = 6;
  cfg.video_dim = 8;
  cfg.hidden = 8;
  cfg.attn_hidden = 4;
  cfg.n_max = 6;
  const auto table = testutil::synth_embeddings(testutil::synth_vocab(18), cfg.embed_dim, 2);
  auto store = testutil::synth_store(rows, 4, 4, 4, 8);
  const auto params = init_params<float>(cfg, 77);

  const auto r1 = evaluate(params, rows, store, table, cfg);
  auto shuffled = rows;
  Rng rng(15);
  rng.shuffle(shuffled);
  const auto r2 = evaluate(params, shuffled, store, table, cfg);
  CHECK(r1.overall_accuracy == doctest::Approx(r2.overall_accuracy));
  CHECK(r1.counts == r2.counts);
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].row_id == before[i].row_id);
    CHECK(rows[i].candidates == before[i].candidates);
    CHECK(rows[i].label == before[i].label);
  }
}

TEST_CASE("mirroring the test candidates and labels leaves accuracy unchanged") {
  const auto rows = test_rows(25, 8);
  ModelConfig cfg;
  cfg.embed_dim = 6;
  cfg.video_dim = 8;
  cfg.hidden = 8;
  cfg.attn_hidden = 4;
  cfg.n_max = 6;
  const auto table = testutil::synth_embeddings(testutil::synth_vocab(18), cfg.embed_dim, 2);
  auto store = testutil::synth_store(rows, 4, 4, 4, 8);
  const auto params = init_params<float>(cfg, 31);

  std::vector<DatasetRow> mirrored = rows;
  for (auto& row : mirrored) {
    std::reverse(row.candidates.begin(), row.candidates.end());
    row.label = 4 - row.label;  // provenance untouched: this is a test-protocol variant
  }
  const auto r1 = evaluate(params, rows, store, table, cfg);
  const auto r2 = evaluate(params, mirrored, store, table, cfg);
  CHECK(r1.overall_accuracy == doctest::Approx(r2.overall_accuracy));
}

TEST_CASE("plain mean reproduces the reference table average") {
  const std::vector<double> split_accs = {31.82, 37.57, 27.27};
  CHECK(plain_mean(split_accs) == doctest::Approx(32.22).epsilon(0.005 / 32.22));
}

TEST_CASE("standard_plans: the 7 rows with the right stage combinations") {
  const auto plans = standard_plans(9, 2);
  REQUIRE(plans.size() == 7);
  CHECK(plans[0].first == "none");
  CHECK_FALSE(plans[0].second.enable_hflip);
  CHECK_FALSE(plans[0].second.enable_resample);
  CHECK_FALSE(plans[0].second.enable_mirror);
  CHECK(plans[1].second.enable_mirror);
  CHECK(plans[2].second.enable_resample);
  CHECK(plans[2].second.resample_copies == 2);
  CHECK(plans[3].second.enable_resample);
  CHECK(plans[3].second.enable_mirror);
  CHECK(plans[4].second.enable_hflip);
  CHECK(plans[5].second.enable_hflip);
  CHECK(plans[5].second.enable_resample);
  CHECK(plans[6].second.enable_hflip);
  CHECK(plans[6].second.enable_resample);
  CHECK(plans[6].second.enable_mirror);
  for (const auto& [label, plan] : plans) CHECK_NOTHROW(validate_plan(plan));
}

TEST_CASE("bias report: deterministic uniform labels yield no flags") {
  std::vector<DatasetRow> rows;
  auto base = testutil::synth_rows({.rows = 40, .vocab_size = 18, .seed = 2});
  for (size_t i = 0; i < base.size(); ++i) {
    base[i].label = int(i % 5);  // exactly 20% per position
    rows.push_back(base[i]);
  }
  const auto report = bias_report(rows);
  for (const auto& [t, tb] : report.per_type) CHECK(tb.flagged_positions.empty());
}

TEST_CASE("bias report flags shares above 25%") {
  auto rows = testutil::synth_rows({.rows = 20, .vocab_size = 18, .seed = 2});
  for (auto& row : rows) {
    row.qtype = QuestionType::Act3rd;
    row.label = 4;
  }
  rows[0].label = 1;
  const auto report = bias_report(rows);
  const auto& tb = report.per_type.at(QuestionType::Act3rd);
  REQUIRE(tb.flagged_positions.size() == 1);
  CHECK(tb.flagged_positions[0] == 4);
  CHECK(tb.shares[4] == doctest::Approx(95.0));
  CHECK(report.to_text().find("Act3rd") != std::string::npos);
  CHECK(report.to_json().find("flagged_positions") != std::string::npos);
}

TEST_CASE("run_matrix: structure, identical test sets, avg of the cells") {
  auto rows = testutil::synth_rows({.rows = 24, .vocab_size = 24, .seed = 14});
  for (auto& row : rows) row.qtype = QuestionType::Obj1st;  // one shared, ample pool
  auto store = testutil::synth_store(rows, 3, 3, 3, 5);
  const auto table = testutil::synth_embeddings(testutil::synth_vocab(24), 4, 2);
  ModelConfig mcfg;
  mcfg.embed_dim = 4;
  mcfg.video_dim = 6;
  mcfg.hidden = 4;
  mcfg.attn_hidden = 2;
  mcfg.n_max = 4;
  TrainConfig tcfg;
  tcfg.epochs = 1;
  tcfg.seed = 3;

  const auto splits = auto_splits(rows, 2, 0.75, 17);
  REQUIRE(splits.size() == 2);
  CHECK(splits[0].train_ids.size() == 18);
  CHECK(splits[0].test_ids.size() == 6);
  CHECK_FALSE(splits[0].test_ids == splits[1].test_ids);

  std::vector<std::pair<std::string, AugmentationPlan>> plans;
  AugmentationPlan none;
  AugmentationPlan mirror;
  mirror.enable_mirror = true;
  plans.emplace_back("none", none);
  plans.emplace_back("+mirror", mirror);

  const auto result = run_matrix(rows, splits, plans, store, table, mcfg, tcfg);
  REQUIRE(result.rows.size() == 2);
  REQUIRE(result.rows[0].cells.size() == 2);
  for (const auto& row : result.rows) {
    for (const auto& cell : row.cells) {
      REQUIRE_MESSAGE(cell.report.has_value(), cell.error);
    }
    REQUIRE(row.avg.has_value());
    const double expect =
        (row.cells[0].report->overall_accuracy + row.cells[1].report->overall_accuracy) / 2.0;
    CHECK(*row.avg == doctest::Approx(expect));
  }
  // both plans evaluated the same test rows per split
  for (int s = 0; s < 2; ++s) {
    CHECK(result.rows[0].cells[size_t(s)].report->total_rows() ==
          result.rows[1].cells[size_t(s)].report->total_rows());
  }
  const auto text = result.to_text();
  CHECK(text.find("augmentation") != std::string::npos);
  CHECK(text.find("+mirror") != std::string::npos);
  const auto csv = result.to_csv();
  CHECK(csv.find("augmentation,split0,split1,avg") == 0);
  const auto per_type = result.per_type_csv();
  CHECK(per_type.find("Obj1st") != std::string::npos);
}

TEST_CASE("run_matrix preserves partial results when a cell fails") {
  auto rows = testutil::synth_rows({.rows = 8, .vocab_size = 16, .seed = 1});
  auto store = testutil::synth_store(rows, 3, 3, 3, 5);
  const auto table = testutil::synth_embeddings(testutil::synth_vocab(16), 4, 2);
  ModelConfig mcfg;
  mcfg.embed_dim = 4;
  mcfg.video_dim = 6;
  mcfg.hidden = 4;
  mcfg.attn_hidden = 2;
  mcfg.n_max = 4;
  TrainConfig tcfg;
  tcfg.epochs = 1;

  SplitSpec good;
  good.split_index = 0;
  for (int i = 0; i < 6; ++i) good.train_ids.push_back(rows[size_t(i)].row_id);
  for (int i = 6; i < 8; ++i) good.test_ids.push_back(rows[size_t(i)].row_id);
  SplitSpec bad = good;
  bad.split_index = 1;
  bad.test_ids.push_back("missing-row");
  const std::vector<SplitSpec> splits{good, bad};

  std::vector<std::pair<std::string, AugmentationPlan>> plans;
  plans.emplace_back("none", AugmentationPlan{});
  const auto result = run_matrix(rows, splits, plans, store, table, mcfg, tcfg);
  REQUIRE(result.rows.size() == 1);
  CHECK(result.rows[0].cells[0].report.has_value());
  CHECK_FALSE(result.rows[0].cells[1].report.has_value());
  CHECK_FALSE(result.rows[0].cells[1].error.empty());
  REQUIRE(result.rows[0].avg.has_value());  // mean over the completed cells
  CHECK(*result.rows[0].avg == doctest::Approx(result.rows[0].cells[0].report->overall_accuracy));
}

TEST_CASE("eval report JSON carries the plan echo") {
  const auto rows = test_rows(5, 21);
  auto report = evaluate_with_scorer(rows, perfect_scorer());
  AugmentationPlan plan;
  plan.enable_mirror = true;
  report.plan_echo = plan;
  const auto j = report.to_json();
  CHECK(j.find("augmentation_plan") != std::string::npos);
  CHECK(j.find("\"enable_mirror\": true") != std::string::npos);
}
