#include "vqa/dataset.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace vqa {

using nlohmann::json;

std::string to_string(QuestionType t) {
  switch (t) {
    case QuestionType::Act1st: return "Act1st";
    case QuestionType::Act3rd: return "Act3rd";
    case QuestionType::Obj1st: return "Obj1st";
    case QuestionType::Obj3rd: return "Obj3rd";
    case QuestionType::Who1st: return "Who1st";
    case QuestionType::Who3rd: return "Who3rd";
    case QuestionType::Cnt: return "Cnt";
    case QuestionType::Col: return "Col";
  }
  return "?";
}

std::optional<QuestionType> qtype_from_string(const std::string& s) {
  for (QuestionType t : kQuestionTypes) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

std::string to_string(Split s) { return s == Split::Train ? "train" : "test"; }

std::optional<Split> split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  return std::nullopt;
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Original: return "original";
    case Provenance::Resampled: return "resampled";
    case Provenance::Mirrored: return "mirrored";
    case Provenance::Hflipped: return "hflipped";
  }
  return "?";
}

std::optional<Provenance> provenance_from_string(const std::string& s) {
  if (s == "original") return Provenance::Original;
  if (s == "resampled") return Provenance::Resampled;
  if (s == "mirrored") return Provenance::Mirrored;
  if (s == "hflipped") return Provenance::Hflipped;
  return std::nullopt;
}

void validate_row(const DatasetRow& row) {
  auto fail = [&](const std::string& msg) {
    throw validation_error("row \"" + row.row_id + "\": " + msg);
  };
  if (row.row_id.empty()) throw validation_error("row with empty row_id");
  if (row.label < 0 || row.label > 4) fail("label must be in [0,4]");
  std::set<std::string> seen;
  for (const auto& c : row.candidates) {
    if (c.empty()) fail("candidates must be non-empty text");
    if (!seen.insert(c).second) fail("candidates must be pairwise distinct");
  }
  if (row.provenance.empty()) fail("provenance must not be empty");
}

namespace {

DatasetRow row_from_json(const json& j) {
  DatasetRow row;
  auto need = [&](const char* key) -> const json& {
    if (!j.contains(key)) throw validation_error(std::string("missing field \"") + key + "\"");
    return j.at(key);
  };
  row.row_id = need("row_id").get<std::string>();
  row.clip_id = need("clip_id").get<std::string>();
  row.question = need("question").get<std::string>();
  const json& cands = need("candidates");
  if (!cands.is_array() || cands.size() != 5)
    throw validation_error("row \"" + row.row_id + "\": candidates must have length 5");
  for (size_t i = 0; i < 5; ++i) row.candidates[i] = cands[i].get<std::string>();
  const json& lbl = need("label");
  if (!lbl.is_number_integer())
    throw validation_error("row \"" + row.row_id + "\": label must be an integer");
  row.label = lbl.get<int>();
  const auto qt = qtype_from_string(need("qtype").get<std::string>());
  if (!qt) throw validation_error("row \"" + row.row_id + "\": unknown qtype");
  row.qtype = *qt;
  const auto sp = split_from_string(need("split").get<std::string>());
  if (!sp) throw validation_error("row \"" + row.row_id + "\": unknown split");
  row.split = *sp;
  if (j.contains("provenance")) {
    row.provenance.clear();
    for (const auto& p : j.at("provenance")) {
      const auto pv = provenance_from_string(p.get<std::string>());
      if (!pv) throw validation_error("row \"" + row.row_id + "\": unknown provenance entry");
      row.provenance.push_back(*pv);
    }
  }
  validate_row(row);
  return row;
}

}  // namespace

std::vector<DatasetRow> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open manifest: " + path.string());
  std::vector<DatasetRow> rows;
  std::unordered_set<std::string> ids;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw validation_error(path.filename().string() + ":" + std::to_string(lineno) +
                             ": parse error: " + e.what());
    }
    try {
      rows.push_back(row_from_json(j));
    } catch (const validation_error& e) {
      throw validation_error(path.filename().string() + ":" + std::to_string(lineno) + ": " +
                             e.what());
    } catch (const json::exception& e) {
      throw validation_error(path.filename().string() + ":" + std::to_string(lineno) +
                             ": bad field type: " + e.what());
    }
    if (!ids.insert(rows.back().row_id).second)
      throw validation_error(path.filename().string() + ":" + std::to_string(lineno) +
                             ": duplicate row_id \"" + rows.back().row_id + "\"");
  }
  return rows;
}

std::string row_to_json_line(const DatasetRow& row) {
  json j;
  j["row_id"] = row.row_id;
  j["clip_id"] = row.clip_id;
  j["question"] = row.question;
  j["candidates"] = row.candidates;
  j["label"] = row.label;
  j["qtype"] = to_string(row.qtype);
  j["split"] = to_string(row.split);
  json prov = json::array();
  for (Provenance p : row.provenance) prov.push_back(to_string(p));
  j["provenance"] = prov;
  return j.dump();
}

void save_manifest(std::span<const DatasetRow> rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);  // binary: keep \n on every platform
  if (!out) throw io_error("cannot write manifest: " + path.string());
  for (const auto& row : rows) out << row_to_json_line(row) << '\n';
  if (!out) throw io_error("write failed: " + path.string());
}

PoolMap build_pools(std::span<const DatasetRow> rows) {
  PoolMap pools;
  for (QuestionType t : kQuestionTypes) pools[t] = AnswerPool{t, {}};
  for (const auto& row : rows) {
    if (row.split != Split::Train) continue;
    auto& pool = pools[row.qtype];
    for (const auto& c : row.candidates) pool.answers.insert(c);
  }
  return pools;
}

PositionHistogram label_position_histogram(std::span<const DatasetRow> rows, QuestionType qtype) {
  PositionHistogram h;
  for (const auto& row : rows) {
    if (row.qtype != qtype) continue;
    h.counts[size_t(row.label)] += 1;
    h.total += 1;
  }
  return h;
}

void validate_split_spec(const SplitSpec& spec) {
  if (spec.split_index < 0) throw validation_error("split_index must be >= 0");
  std::unordered_set<std::string> train(spec.train_ids.begin(), spec.train_ids.end());
  if (train.size() != spec.train_ids.size())
    throw validation_error("split spec: duplicate id in train_ids");
  std::unordered_set<std::string> test(spec.test_ids.begin(), spec.test_ids.end());
  if (test.size() != spec.test_ids.size())
    throw validation_error("split spec: duplicate id in test_ids");
  for (const auto& id : spec.test_ids) {
    if (train.count(id))
      throw validation_error("split spec: id \"" + id + "\" is in both train_ids and test_ids");
  }
}

SplitSpec load_split_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open split spec: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw validation_error("split spec " + path.filename().string() + ": " + e.what());
  }
  SplitSpec spec;
  try {
    spec.split_index = j.at("split_index").get<int>();
    spec.train_ids = j.at("train_ids").get<std::vector<std::string>>();
    spec.test_ids = j.at("test_ids").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw validation_error("split spec " + path.filename().string() + ": " + e.what());
  }
  validate_split_spec(spec);
  return spec;
}

void save_split_spec(const SplitSpec& spec, const std::filesystem::path& path) {
  json j;
  j["split_index"] = spec.split_index;
  j["train_ids"] = spec.train_ids;
  j["test_ids"] = spec.test_ids;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write split spec: " + path.string());
  out << j.dump(2) << '\n';
}

std::pair<std::vector<DatasetRow>, std::vector<DatasetRow>> apply_split(
    std::span<const DatasetRow> rows, const SplitSpec& spec) {
  validate_split_spec(spec);
  std::unordered_set<std::string> train(spec.train_ids.begin(), spec.train_ids.end());
  std::unordered_set<std::string> test(spec.test_ids.begin(), spec.test_ids.end());
  std::pair<std::vector<DatasetRow>, std::vector<DatasetRow>> out;
  size_t matched = 0;
  for (const auto& row : rows) {
    if (train.count(row.row_id)) {
      out.first.push_back(row);
      out.first.back().split = Split::Train;
      ++matched;
    } else if (test.count(row.row_id)) {
      out.second.push_back(row);
      out.second.back().split = Split::Test;
      ++matched;
    }
  }
  if (matched != train.size() + test.size())
    throw validation_error("split spec references row_ids absent from the manifest");
  return out;
}

}  // namespace vqa
