#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "vqa/common.hpp"

namespace vqa {

// The eight question categories; answer pools are keyed by these.
enum class QuestionType { Act1st, Act3rd, Obj1st, Obj3rd, Who1st, Who3rd, Cnt, Col };

inline constexpr std::array<QuestionType, 8> kQuestionTypes = {
    QuestionType::Act1st, QuestionType::Act3rd, QuestionType::Obj1st,
    QuestionType::Obj3rd, QuestionType::Who1st, QuestionType::Who3rd,
    QuestionType::Cnt,    QuestionType::Col};

std::string to_string(QuestionType t);
std::optional<QuestionType> qtype_from_string(const std::string& s);

enum class Split { Train, Test };

std::string to_string(Split s);
std::optional<Split> split_from_string(const std::string& s);

enum class Provenance { Original, Resampled, Mirrored, Hflipped };

std::string to_string(Provenance p);
std::optional<Provenance> provenance_from_string(const std::string& s);

// One multiple-choice question: a clip reference, a question, five candidate
// answers of which candidates[label] is correct, and an audit trail of the
// augmentations that produced the row.
struct DatasetRow {
  std::string row_id;
  std::string clip_id;
  std::string question;
  std::array<std::string, 5> candidates;
  int label = 0;
  QuestionType qtype = QuestionType::Act1st;
  Split split = Split::Train;
  std::vector<Provenance> provenance = {Provenance::Original};

  const std::string& correct_answer() const { return candidates[size_t(label)]; }
  bool is_original() const {
    return provenance.size() == 1 && provenance[0] == Provenance::Original;
  }
};

// Throws validation_error naming the violated invariant and the row_id.
void validate_row(const DatasetRow& row);

// Manifest: UTF-8, one JSON record per line, fields named as in DatasetRow.
std::vector<DatasetRow> load_manifest(const std::filesystem::path& path);
void save_manifest(std::span<const DatasetRow> rows, const std::filesystem::path& path);

// Serialization of a single row (exposed for streaming writers).
std::string row_to_json_line(const DatasetRow& row);

struct AnswerPool {
  QuestionType qtype = QuestionType::Act1st;
  std::set<std::string> answers;  // distinct candidate texts of this type
};

using PoolMap = std::map<QuestionType, AnswerPool>;

// Union of candidate texts per question type; only train rows contribute.
PoolMap build_pools(std::span<const DatasetRow> rows);

struct PositionHistogram {
  std::array<int64_t, 5> counts = {0, 0, 0, 0, 0};
  int64_t total = 0;
};

PositionHistogram label_position_histogram(std::span<const DatasetRow> rows, QuestionType qtype);

// Externally supplied train/test partition of a manifest by row_id.
struct SplitSpec {
  int split_index = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

void validate_split_spec(const SplitSpec& spec);
SplitSpec load_split_spec(const std::filesystem::path& path);
void save_split_spec(const SplitSpec& spec, const std::filesystem::path& path);

// Relabels rows per the spec lists; rows absent from both lists are dropped.
// Returns (train rows, test rows) in manifest order.
std::pair<std::vector<DatasetRow>, std::vector<DatasetRow>> apply_split(
    std::span<const DatasetRow> rows, const SplitSpec& spec);

}  // namespace vqa
