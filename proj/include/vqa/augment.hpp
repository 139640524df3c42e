#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vqa/dataset.hpp"
#include "vqa/features.hpp"
#include "vqa/rng.hpp"

namespace vqa {

// Which augmentation stages run, and with what seed. Stages compose in the
// fixed order hflip -> resample -> mirror, each feeding the next.
struct AugmentationPlan {
  bool enable_hflip = false;
  bool enable_resample = false;
  int resample_copies = 0;  // new rows per eligible row; > 0 requires enable_resample
  bool enable_mirror = false;
  uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> lr_lexicon = {{"left", "right"}};
};

void validate_plan(const AugmentationPlan& plan);

// Plan file: TOML-style `key = value` lines mirroring the fields above;
// lr_lexicon is an array of two-element string arrays.
AugmentationPlan load_plan(const std::filesystem::path& path);

// Bidirectional lowercase swap table built from validated pairs.
using Lexicon = std::map<std::string, std::string>;
Lexicon make_lexicon(const std::vector<std::pair<std::string, std::string>>& pairs);

// Replaces whole-word lexicon tokens by their partner, case-insensitively,
// preserving the casing of the first letter. Everything else is untouched.
std::string hflip_text(std::string_view text, const Lexicon& lexicon);

// Reverses candidate order and remaps the label i -> 4 - i.
DatasetRow mirror_row(const DatasetRow& row);

// Keeps the correct answer at its label position and redraws the 4 wrong
// candidates from the pool. Returns fewer than `copies` rows (possibly none)
// when the pool cannot supply enough distinct tuples; the pipeline records
// those skips.
std::vector<DatasetRow> resample_row(const DatasetRow& row, const AnswerPool& pool, int copies,
                                     Rng& rng);

// Text half of the horizontal flip: question and candidates pass through
// hflip_text, clip_id gets the __hflip suffix, label stays put.
DatasetRow hflip_row_text(const DatasetRow& row, const Lexicon& lexicon);

// Full flip of one row: flipped text plus surrogate flipped features.
std::pair<DatasetRow, ClipFeatures> hflip_row(const DatasetRow& row, const ClipFeatures& features,
                                              const Lexicon& lexicon, uint64_t surrogate_seed = 0);

struct SkipRecord {
  std::string row_id;
  std::string reason;
};

struct StageReport {
  std::string stage;
  int64_t input_rows = 0;
  int64_t added_rows = 0;
  std::vector<SkipRecord> skips;
};

struct AugmentationReport {
  std::vector<StageReport> stages;
  int64_t input_rows = 0;
  int64_t final_rows = 0;
  std::string to_json() const;
};

struct AugmentResult {
  std::vector<DatasetRow> rows;
  AugmentationReport report;
};

// Runs the enabled stages over train rows. Each stage appends its outputs
// after the current rows, so the result is deterministic given (rows, plan).
// Flipped clips missing from the store are materialized through
// store.flipped() and registered (persisted when the store is on disk).
// Rejects inputs containing test rows.
AugmentResult augment_split(std::span<const DatasetRow> rows, const PoolMap& pools,
                            FeatureStore& store, const AugmentationPlan& plan);

}  // namespace vqa
