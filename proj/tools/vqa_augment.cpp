// vqa-augment: dataset validation, augmentation, synthetic features,
// training, evaluation, and the full augmentation-by-split result matrix.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vqa/augment.hpp"
#include "vqa/checkpoint.hpp"
#include "vqa/common.hpp"
#include "vqa/dataset.hpp"
#include "vqa/eval.hpp"
#include "vqa/features.hpp"
#include "vqa/model.hpp"
#include "vqa/text.hpp"
#include "vqa/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOpts {
  uint64_t seed = 0;
};

std::vector<vqa::DatasetRow> load_manifests(const std::vector<std::string>& paths) {
  std::vector<vqa::DatasetRow> rows;
  for (const auto& p : paths) {
    auto part = vqa::load_manifest(p);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

void print_type_counts(const std::vector<vqa::DatasetRow>& rows, std::ostream& out) {
  out << "question-type counts\n";
  int64_t total = 0;
  for (vqa::QuestionType t : vqa::kQuestionTypes) {
    int64_t n = 0;
    for (const auto& row : rows)
      if (row.qtype == t) ++n;
    out << "  " << std::left << std::setw(8) << vqa::to_string(t) << std::right << std::setw(6)
        << n << "\n";
    total += n;
  }
  out << "  " << std::left << std::setw(8) << "total" << std::right << std::setw(6) << total
      << "\n";
}

int cmd_validate(const std::string& manifest) {
  const auto rows = vqa::load_manifest(manifest);
  std::cout << "OK: " << rows.size() << " rows\n";
  return 0;
}

int cmd_stats(const std::vector<std::string>& manifests, const std::string& json_out,
              bool all_rows) {
  const auto rows = load_manifests(manifests);
  print_type_counts(rows, std::cout);

  std::vector<vqa::DatasetRow> bias_rows;
  for (const auto& row : rows) {
    if (all_rows || row.split == vqa::Split::Train) bias_rows.push_back(row);
  }
  std::cout << "\n" << (all_rows ? "all rows" : "train rows") << ": " << bias_rows.size() << "\n";
  const auto bias = vqa::bias_report(bias_rows);
  std::cout << bias.to_text();

  if (!json_out.empty()) {
    json j;
    json counts = json::object();
    for (vqa::QuestionType t : vqa::kQuestionTypes) {
      int64_t n = 0;
      for (const auto& row : rows)
        if (row.qtype == t) ++n;
      counts[vqa::to_string(t)] = n;
    }
    j["type_counts"] = counts;
    j["rows"] = rows.size();
    j["bias"] = json::parse(bias.to_json());
    std::ofstream out(json_out, std::ios::binary);
    if (!out) throw vqa::io_error("cannot write " + json_out);
    out << j.dump(2) << '\n';
  }
  return 0;
}

int cmd_augment(const std::string& manifest, const std::string& features,
                const std::string& plan_path, const std::string& out_path,
                const std::string& report_path, const GlobalOpts& g, bool seed_set) {
  vqa::AugmentationPlan plan = vqa::load_plan(plan_path);
  if (seed_set) plan.seed = g.seed;  // flags override the plan file
  auto rows = vqa::load_manifest(manifest);
  std::vector<vqa::DatasetRow> train_rows, test_rows;
  for (auto& row : rows)
    (row.split == vqa::Split::Train ? train_rows : test_rows).push_back(row);

  auto store = vqa::FeatureStore::open_dir(features);
  const auto pools = vqa::build_pools(train_rows);
  auto result = vqa::augment_split(train_rows, pools, store, plan);

  std::vector<vqa::DatasetRow> out_rows = std::move(result.rows);
  out_rows.insert(out_rows.end(), test_rows.begin(), test_rows.end());
  vqa::save_manifest(out_rows, out_path);

  const std::string report = result.report.to_json();
  if (!report_path.empty()) {
    std::ofstream rout(report_path, std::ios::binary);
    if (!rout) throw vqa::io_error("cannot write " + report_path);
    rout << report << '\n';
  }
  std::cout << report << '\n';
  std::cout << "wrote " << out_rows.size() << " rows to " << out_path << "\n";
  return 0;
}

int cmd_synth_features(const std::string& manifest, const std::string& out_dir, int frames,
                       int d_a, int d_m, uint64_t seed) {
  const auto rows = vqa::load_manifest(manifest);
  fs::create_directories(out_dir);
  std::set<std::string> clips;
  for (const auto& row : rows) clips.insert(row.clip_id);
  for (const auto& clip : clips) {
    const auto cf = vqa::synth_features(clip, frames, d_a, d_m, seed);
    vqa::save_features(cf, fs::path(out_dir) / (clip + ".feat"));
  }
  std::cout << "wrote " << clips.size() << " synthetic feature files to " << out_dir << "\n";
  return 0;
}

struct ModelFlags {
  int hidden = 512;
  int attn_hidden = 256;
  int n_max = 40;
};

vqa::ModelConfig make_model_config(const ModelFlags& mf, const vqa::EmbeddingTable& table,
                                   const vqa::FeatureStore& store) {
  vqa::ModelConfig cfg;
  cfg.embed_dim = table.dim;
  cfg.video_dim = store.feature_dim();
  cfg.hidden = mf.hidden;
  cfg.attn_hidden = mf.attn_hidden;
  cfg.n_max = mf.n_max;
  vqa::validate_config(cfg);
  return cfg;
}

// Store dims are fixed lazily by the first load; touch one clip so the
// config can read them.
void prime_store(const vqa::FeatureStore& store, const std::vector<vqa::DatasetRow>& rows) {
  if (!rows.empty()) store.load(rows.front().clip_id);
}

int cmd_train(const std::string& manifest, const std::string& features,
              const std::string& embeddings, const std::string& plan_path,
              const std::string& checkpoint_out, const std::string& metrics_out,
              const ModelFlags& mf, vqa::TrainConfig tcfg) {
  auto rows = vqa::load_manifest(manifest);
  auto store = vqa::FeatureStore::open_dir(features);
  const auto table = vqa::load_embeddings(embeddings);
  prime_store(store, rows);
  const auto mcfg = make_model_config(mf, table, store);

  if (!plan_path.empty()) {
    const auto plan = vqa::load_plan(plan_path);
    std::vector<vqa::DatasetRow> train_rows, test_rows;
    for (auto& row : rows)
      (row.split == vqa::Split::Train ? train_rows : test_rows).push_back(row);
    const auto pools = vqa::build_pools(train_rows);
    auto aug = vqa::augment_split(train_rows, pools, store, plan);
    std::cerr << aug.report.to_json() << '\n';
    rows = std::move(aug.rows);
    rows.insert(rows.end(), test_rows.begin(), test_rows.end());
  }

  std::ofstream metrics;
  if (!metrics_out.empty()) {
    metrics.open(metrics_out, std::ios::binary | std::ios::app);
    if (!metrics) throw vqa::io_error("cannot write " + metrics_out);
  }
  auto result = vqa::train(rows, store, table, mcfg, tcfg, metrics.is_open() ? &metrics : nullptr);
  vqa::save_checkpoint(checkpoint_out, mcfg, result.params);
  std::cout << "best epoch " << result.best_epoch << ", metric "
            << (result.best_epoch > 0 ? result.best_metric : 0.0) << ", checkpoint "
            << checkpoint_out << "\n";
  if (result.diverged) {
    std::cerr << "training diverged (non-finite loss); checkpoint holds the last good state\n";
    return 2;
  }
  return 0;
}

int cmd_eval(const std::string& manifest, const std::string& features,
             const std::string& embeddings, const std::string& checkpoint,
             const std::string& report_out) {
  auto [cfg, params] = vqa::load_checkpoint(checkpoint);
  const auto rows = vqa::load_manifest(manifest);
  std::vector<vqa::DatasetRow> test_rows;
  for (const auto& row : rows)
    if (row.split == vqa::Split::Test) test_rows.push_back(row);
  auto store = vqa::FeatureStore::open_dir(features);
  const auto table = vqa::load_embeddings(embeddings);
  const auto report = vqa::evaluate(params, test_rows, store, table, cfg);
  std::cout << report.to_json() << '\n';
  if (!report_out.empty()) {
    std::ofstream out(report_out, std::ios::binary);
    if (!out) throw vqa::io_error("cannot write " + report_out);
    out << report.to_json() << '\n';
  }
  return 0;
}

int cmd_matrix(const std::string& manifest, const std::string& features,
               const std::string& embeddings, const std::vector<std::string>& split_paths,
               bool use_auto_splits, double train_fraction, const std::string& out_dir,
               int copies, const ModelFlags& mf, vqa::TrainConfig tcfg, const GlobalOpts& g) {
  const auto rows = vqa::load_manifest(manifest);
  auto store = vqa::FeatureStore::open_dir(features);
  const auto table = vqa::load_embeddings(embeddings);
  prime_store(store, rows);
  const auto mcfg = make_model_config(mf, table, store);

  std::vector<vqa::SplitSpec> splits;
  if (!split_paths.empty()) {
    for (const auto& p : split_paths) splits.push_back(vqa::load_split_spec(p));
  } else if (use_auto_splits) {
    splits = vqa::auto_splits(rows, 3, train_fraction, g.seed);
  } else {
    throw vqa::validation_error("matrix: pass --splits files or --auto-splits");
  }

  const auto plans = vqa::standard_plans(g.seed, copies);
  const auto result = vqa::run_matrix(rows, splits, plans, store, table, mcfg, tcfg);
  std::cout << result.to_text();
  for (const auto& r : result.rows) {
    for (size_t s = 0; s < r.cells.size(); ++s) {
      if (!r.cells[s].error.empty())
        std::cerr << "cell (" << r.label << ", split" << s << ") failed: " << r.cells[s].error
                  << "\n";
    }
  }
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream(fs::path(out_dir) / "table.txt", std::ios::binary) << result.to_text();
    std::ofstream(fs::path(out_dir) / "table.csv", std::ios::binary) << result.to_csv();
    std::ofstream(fs::path(out_dir) / "per_type.csv", std::ios::binary) << result.per_type_csv();
    std::cout << "wrote table.txt, table.csv, per_type.csv to " << out_dir << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiple-choice VideoQA augmentation, training and evaluation"};
  app.require_subcommand(1);
  app.set_config("--config")->description("INI/TOML config file (file < env < flags)");

  GlobalOpts g;
  auto* seed_opt =
      app.add_option("--seed", g.seed, "global seed")->envname("VQA_SEED")->capture_default_str();

  // validate
  std::string manifest;
  auto* validate = app.add_subcommand("validate", "check a manifest against the row invariants");
  validate->add_option("manifest", manifest, "manifest file")->required();

  // stats
  std::vector<std::string> stats_manifests;
  std::string stats_json;
  bool stats_all_rows = false;
  auto* stats = app.add_subcommand("stats", "question-type counts and label-position bias");
  stats->add_option("manifest", stats_manifests, "manifest file(s), pooled")->required();
  stats->add_option("--json", stats_json, "write machine-readable stats here");
  stats->add_flag("--all-rows", stats_all_rows, "bias over all rows, not just train");

  // augment
  std::string aug_manifest, aug_features, aug_plan, aug_out, aug_report;
  auto* augment = app.add_subcommand("augment", "expand the train split per an augmentation plan");
  augment->add_option("--manifest", aug_manifest)->required();
  augment->add_option("--features", aug_features, "feature directory (flipped clips are written here)")->required();
  augment->add_option("--plan", aug_plan, "plan file")->required();
  augment->add_option("--out", aug_out, "output manifest")->required();
  augment->add_option("--report", aug_report, "write the stage report JSON here");

  // synth-features
  std::string sf_manifest, sf_out;
  int sf_frames = 8, sf_da = 16, sf_dm = 16;
  auto* synth = app.add_subcommand("synth-features", "emit a synthetic feature store for a manifest");
  synth->add_option("--manifest", sf_manifest)->required();
  synth->add_option("--out", sf_out, "output directory")->required();
  synth->add_option("--frames", sf_frames, "frames per clip")->capture_default_str();
  synth->add_option("--appearance-dim", sf_da)->capture_default_str();
  synth->add_option("--motion-dim", sf_dm)->capture_default_str();

  // shared model/train flags
  ModelFlags mf;
  vqa::TrainConfig tcfg;
  auto add_model_flags = [&](CLI::App* cmd) {
    cmd->add_option("--hidden", mf.hidden, "encoder output width H")->capture_default_str();
    cmd->add_option("--attn-hidden", mf.attn_hidden, "attention hidden width h")->capture_default_str();
    cmd->add_option("--n-max", mf.n_max, "frame cap")->capture_default_str();
  };
  auto add_train_flags = [&](CLI::App* cmd) {
    cmd->add_option("--lr", tcfg.learning_rate, "learning rate")->capture_default_str();
    cmd->add_option("--batch-size", tcfg.batch_size)->capture_default_str();
    cmd->add_option("--epochs", tcfg.epochs)->capture_default_str();
    cmd->add_option("--beta1", tcfg.beta1)->capture_default_str();
    cmd->add_option("--beta2", tcfg.beta2)->capture_default_str();
    cmd->add_option("--adam-eps", tcfg.adam_eps)->capture_default_str();
  };

  // train
  std::string tr_manifest, tr_features, tr_embeddings, tr_plan, tr_ckpt = "model.ckpt",
              tr_metrics;
  auto* train_cmd = app.add_subcommand("train", "train the attention model");
  train_cmd->add_option("--manifest", tr_manifest)->required();
  train_cmd->add_option("--features", tr_features)->required();
  train_cmd->add_option("--embeddings", tr_embeddings, "word-vector text file")->required();
  train_cmd->add_option("--plan", tr_plan, "augmentation plan applied to the train split first");
  train_cmd->add_option("--checkpoint", tr_ckpt, "output checkpoint")->capture_default_str();
  train_cmd->add_option("--metrics", tr_metrics, "append per-epoch metrics JSONL here");
  add_model_flags(train_cmd);
  add_train_flags(train_cmd);

  // eval
  std::string ev_manifest, ev_features, ev_embeddings, ev_ckpt, ev_report;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  eval_cmd->add_option("--manifest", ev_manifest)->required();
  eval_cmd->add_option("--features", ev_features)->required();
  eval_cmd->add_option("--embeddings", ev_embeddings)->required();
  eval_cmd->add_option("--checkpoint", ev_ckpt)->required();
  eval_cmd->add_option("--report", ev_report, "write the report JSON here");

  // matrix
  std::string mx_manifest, mx_features, mx_embeddings, mx_out;
  std::vector<std::string> mx_splits;
  bool mx_auto = false;
  double mx_train_frac = 0.7;
  int mx_copies = 1;
  auto* matrix_cmd =
      app.add_subcommand("matrix", "train/evaluate the 7 standard plans across splits");
  matrix_cmd->add_option("--manifest", mx_manifest)->required();
  matrix_cmd->add_option("--features", mx_features)->required();
  matrix_cmd->add_option("--embeddings", mx_embeddings)->required();
  matrix_cmd->add_option("--splits", mx_splits, "split spec JSON files");
  matrix_cmd->add_flag("--auto-splits", mx_auto, "derive 3 seeded splits from the manifest");
  matrix_cmd->add_option("--train-fraction", mx_train_frac)->capture_default_str();
  matrix_cmd->add_option("--copies", mx_copies, "resample copies per row")->capture_default_str();
  matrix_cmd->add_option("--out-dir", mx_out, "write table.txt/table.csv/per_type.csv here");
  add_model_flags(matrix_cmd);
  add_train_flags(matrix_cmd);

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    tcfg.seed = g.seed;
    if (app.got_subcommand(validate)) return cmd_validate(manifest);
    if (app.got_subcommand(stats)) return cmd_stats(stats_manifests, stats_json, stats_all_rows);
    if (app.got_subcommand(augment))
      return cmd_augment(aug_manifest, aug_features, aug_plan, aug_out, aug_report, g,
                         seed_opt->count() > 0);
    if (app.got_subcommand(synth))
      return cmd_synth_features(sf_manifest, sf_out, sf_frames, sf_da, sf_dm, g.seed);
    if (app.got_subcommand(train_cmd))
      return cmd_train(tr_manifest, tr_features, tr_embeddings, tr_plan, tr_ckpt, tr_metrics, mf,
                       tcfg);
    if (app.got_subcommand(eval_cmd))
      return cmd_eval(ev_manifest, ev_features, ev_embeddings, ev_ckpt, ev_report);
    if (app.got_subcommand(matrix_cmd))
      return cmd_matrix(mx_manifest, mx_features, mx_embeddings, mx_splits, mx_auto,
                        mx_train_frac, mx_out, mx_copies, mf, tcfg, g);
  } catch (const vqa::validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
