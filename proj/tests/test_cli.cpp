#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "synth.hpp"
#include "vqa/augment.hpp"
#include "vqa/dataset.hpp"

using namespace vqa;
using testutil::TempDir;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(VQA_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_plan(const std::filesystem::path& p, const std::string& body) {
  std::ofstream out(p);
  out << body;
}

}  // namespace

TEST_CASE("cli: validate exits 0 on a good manifest, 1 on violations") {
  TempDir dir;
  const auto rows = testutil::synth_rows({.rows = 6, .vocab_size = 10, .seed = 1});
  const auto good = dir.path() / "good.jsonl";
  save_manifest(rows, good);
  CHECK(run_cli("validate " + good.string()) == 0);

  const auto bad = dir.path() / "bad.jsonl";
  std::ofstream out(bad);
  out << R"({"row_id":"x","clip_id":"c","question":"q","candidates":["a","a","b","c","d"],)"
      << R"("label":0,"qtype":"Cnt","split":"train"})" << "\n";
  out.close();
  CHECK(run_cli("validate " + bad.string()) == 1);
  CHECK(run_cli("validate " + (dir.path() / "absent.jsonl").string()) == 2);
}

TEST_CASE("cli: synth-features then augment is deterministic byte-for-byte") {
  TempDir dir;
  auto rows = testutil::synth_rows({.rows = 8, .vocab_size = 24, .seed = 3});
  for (auto& row : rows) row.qtype = QuestionType::Who3rd;
  const auto manifest = dir.path() / "m.jsonl";
  save_manifest(rows, manifest);

  const auto feat1 = dir.path() / "f1";
  const auto feat2 = dir.path() / "f2";
  REQUIRE(run_cli("synth-features --manifest " + manifest.string() + " --out " + feat1.string() +
                  " --frames 3 --appearance-dim 4 --motion-dim 4 --seed 5") == 0);
  REQUIRE(run_cli("synth-features --manifest " + manifest.string() + " --out " + feat2.string() +
                  " --frames 3 --appearance-dim 4 --motion-dim 4 --seed 5") == 0);
  for (const auto& row : rows) {
    const auto f = row.clip_id + ".feat";
    CHECK(slurp(feat1 / f) == slurp(feat2 / f));
  }

  const auto plan = dir.path() / "plan.toml";
  write_plan(plan,
             "enable_hflip = true\nenable_resample = true\nresample_copies = 1\n"
             "enable_mirror = true\nseed = 11\n");
  const auto out1 = dir.path() / "aug1.jsonl";
  const auto out2 = dir.path() / "aug2.jsonl";
  REQUIRE(run_cli("augment --manifest " + manifest.string() + " --features " + feat1.string() +
                  " --plan " + plan.string() + " --out " + out1.string()) == 0);
  REQUIRE(run_cli("augment --manifest " + manifest.string() + " --features " + feat2.string() +
                  " --plan " + plan.string() + " --out " + out2.string()) == 0);
  const auto bytes1 = slurp(out1);
  CHECK_FALSE(bytes1.empty());
  CHECK(bytes1 == slurp(out2));
  // flipped features persisted into the store
  CHECK(std::filesystem::exists(feat1 / (rows[0].clip_id + "__hflip.feat")));
  const auto aug_rows = load_manifest(out1);
  CHECK(aug_rows.size() == 8 * 8);  // hflip x2, resample x2, mirror x2
}

TEST_CASE("cli: augment refuses a plan that cannot parse") {
  TempDir dir;
  const auto rows = testutil::synth_rows({.rows = 2, .vocab_size = 10, .seed = 2});
  const auto manifest = dir.path() / "m.jsonl";
  save_manifest(rows, manifest);
  const auto feat = dir.path() / "f";
  REQUIRE(run_cli("synth-features --manifest " + manifest.string() + " --out " + feat.string()) ==
          0);
  const auto plan = dir.path() / "plan.toml";
  write_plan(plan, "enable_warp = true\n");
  CHECK(run_cli("augment --manifest " + manifest.string() + " --features " + feat.string() +
                " --plan " + plan.string() + " --out " + (dir.path() / "o.jsonl").string()) == 1);
}

TEST_CASE("cli: stats runs and writes JSON") {
  TempDir dir;
  const auto rows = testutil::synth_rows({.rows = 16, .vocab_size = 12, .seed = 9});
  const auto manifest = dir.path() / "m.jsonl";
  save_manifest(rows, manifest);
  const auto json_out = dir.path() / "stats.json";
  CHECK(run_cli("stats " + manifest.string() + " --json " + json_out.string()) == 0);
  const auto body = slurp(json_out);
  CHECK(body.find("type_counts") != std::string::npos);
  CHECK(body.find("bias") != std::string::npos);
}

TEST_CASE("cli: train writes a checkpoint and eval reads it back") {
  TempDir dir;
  auto rows = testutil::synth_rows({.rows = 10, .vocab_size = 16, .seed = 21});
  for (size_t i = 7; i < rows.size(); ++i) rows[i].split = Split::Test;
  const auto manifest = dir.path() / "m.jsonl";
  save_manifest(rows, manifest);
  const auto feat = dir.path() / "f";
  REQUIRE(run_cli("synth-features --manifest " + manifest.string() + " --out " + feat.string() +
                  " --frames 3 --appearance-dim 3 --motion-dim 3") == 0);

  const auto emb = dir.path() / "emb.txt";
  {
    std::ofstream out(emb);
    const auto vocab = testutil::synth_vocab(16);
    Rng rng(4);
    for (const auto& tok : vocab) {
      out << tok;
      for (int j = 0; j < 4; ++j) out << " " << rng.uniform(-1, 1);
      out << "\n";
    }
  }
  const auto ckpt = dir.path() / "model.ckpt";
  const auto metrics = dir.path() / "metrics.jsonl";
  REQUIRE(run_cli("train --manifest " + manifest.string() + " --features " + feat.string() +
                  " --embeddings " + emb.string() + " --checkpoint " + ckpt.string() +
                  " --metrics " + metrics.string() +
                  " --hidden 8 --attn-hidden 4 --n-max 4 --epochs 2 --batch-size 4") == 0);
  CHECK(std::filesystem::exists(ckpt));
  const auto log = slurp(metrics);
  CHECK(log.find("\"epoch\":1") != std::string::npos);
  CHECK(log.find("train_loss") != std::string::npos);

  const auto report = dir.path() / "report.json";
  REQUIRE(run_cli("eval --manifest " + manifest.string() + " --features " + feat.string() +
                  " --embeddings " + emb.string() + " --checkpoint " + ckpt.string() +
                  " --report " + report.string()) == 0);
  CHECK(slurp(report).find("overall_accuracy") != std::string::npos);
}

TEST_CASE("cli: matrix with auto-splits emits the 7-row table") {
  TempDir dir;
  auto rows = testutil::synth_rows({.rows = 16, .vocab_size = 20, .seed = 33});
  for (auto& row : rows) row.qtype = QuestionType::Act1st;
  const auto manifest = dir.path() / "m.jsonl";
  save_manifest(rows, manifest);
  const auto feat = dir.path() / "f";
  REQUIRE(run_cli("synth-features --manifest " + manifest.string() + " --out " + feat.string() +
                  " --frames 2 --appearance-dim 2 --motion-dim 2") == 0);
  const auto emb = dir.path() / "emb.txt";
  {
    std::ofstream out(emb);
    const auto vocab = testutil::synth_vocab(20);
    Rng rng(4);
    for (const auto& tok : vocab) {
      out << tok;
      for (int j = 0; j < 3; ++j) out << " " << rng.uniform(-1, 1);
      out << "\n";
    }
  }
  const auto out_dir = dir.path() / "matrix";
  REQUIRE(run_cli("matrix --manifest " + manifest.string() + " --features " + feat.string() +
                  " --embeddings " + emb.string() + " --auto-splits --out-dir " +
                  out_dir.string() + " --hidden 4 --attn-hidden 2 --n-max 2 --epochs 1") == 0);
  const auto csv = slurp(out_dir / "table.csv");
  CHECK(csv.find("augmentation,split0,split1,split2,avg") == 0);
  int lines = 0;
  for (char c : csv)
    if (c == '\n') ++lines;
  CHECK(lines == 8);  // header + 7 plan rows
  CHECK(slurp(out_dir / "per_type.csv").find("Act1st") != std::string::npos);
  // no splits and no --auto-splits is a usage error
  CHECK(run_cli("matrix --manifest " + manifest.string() + " --features " + feat.string() +
                " --embeddings " + emb.string()) == 1);
}
