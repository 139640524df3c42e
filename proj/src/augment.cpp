#include "vqa/augment.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace vqa {

using nlohmann::json;

void validate_plan(const AugmentationPlan& plan) {
  if (plan.resample_copies < 0)
    throw validation_error("plan: resample_copies must be >= 0");
  if (plan.resample_copies > 0 && !plan.enable_resample)
    throw validation_error("plan: resample_copies > 0 requires enable_resample");
  make_lexicon(plan.lr_lexicon);  // throws on malformed pairs
}

Lexicon make_lexicon(const std::vector<std::pair<std::string, std::string>>& pairs) {
  Lexicon lex;
  auto lower = [](std::string s) {
    for (auto& c : s) c = char(std::tolower((unsigned char)c));
    return s;
  };
  for (const auto& [a, b] : pairs) {
    const std::string la = lower(a), lb = lower(b);
    if (la.empty() || lb.empty()) throw validation_error("lexicon: empty swap token");
    if (la == lb) throw validation_error("lexicon: token \"" + la + "\" paired with itself");
    if (!lex.emplace(la, lb).second || !lex.emplace(lb, la).second)
      throw validation_error("lexicon: token appears in two swap pairs");
  }
  return lex;
}

namespace {

bool word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = char(std::tolower((unsigned char)c));
  return out;
}

}  // namespace

std::string hflip_text(std::string_view text, const Lexicon& lexicon) {
  std::string out;
  out.reserve(text.size());
  size_t i = 0;
  while (i < text.size()) {
    if (!word_char((unsigned char)text[i])) {
      out.push_back(text[i]);
      ++i;
      continue;
    }
    size_t j = i;
    while (j < text.size() && word_char((unsigned char)text[j])) ++j;
    std::string_view word = text.substr(i, j - i);
    auto it = lexicon.find(lower_ascii(word));
    if (it == lexicon.end()) {
      out.append(word);
    } else {
      std::string repl = it->second;
      if (std::isupper((unsigned char)word.front()))
        repl[0] = char(std::toupper((unsigned char)repl[0]));
      out.append(repl);
    }
    i = j;
  }
  return out;
}

DatasetRow mirror_row(const DatasetRow& row) {
  DatasetRow out = row;
  out.row_id = row.row_id + "__mir";
  for (int i = 0; i < 5; ++i) out.candidates[size_t(i)] = row.candidates[size_t(4 - i)];
  out.label = 4 - row.label;
  out.provenance.push_back(Provenance::Mirrored);
  return out;
}

DatasetRow hflip_row_text(const DatasetRow& row, const Lexicon& lexicon) {
  DatasetRow out = row;
  out.row_id = row.row_id + "__hf";
  out.clip_id = row.clip_id + kHflipSuffix;
  out.question = hflip_text(row.question, lexicon);
  for (auto& c : out.candidates) c = hflip_text(c, lexicon);
  out.provenance.push_back(Provenance::Hflipped);
  validate_row(out);  // the lexicon could in principle collapse two candidates
  return out;
}

std::pair<DatasetRow, ClipFeatures> hflip_row(const DatasetRow& row, const ClipFeatures& features,
                                              const Lexicon& lexicon, uint64_t surrogate_seed) {
  if (features.clip_id != row.clip_id)
    throw validation_error("hflip_row: features belong to clip \"" + features.clip_id +
                           "\", row references \"" + row.clip_id + "\"");
  return {hflip_row_text(row, lexicon), flip_columns_surrogate(features, surrogate_seed)};
}

namespace {

// Number of 4-subsets, saturating well above any copies we would draw.
int64_t choose4(int64_t n) {
  if (n < 4) return 0;
  if (n > 4096) return INT64_MAX / 2;
  return n * (n - 1) * (n - 2) * (n - 3) / 24;
}

}  // namespace

std::vector<DatasetRow> resample_row(const DatasetRow& row, const AnswerPool& pool, int copies,
                                     Rng& rng) {
  std::vector<DatasetRow> out;
  if (copies <= 0) return out;
  if (pool.qtype != row.qtype)
    throw validation_error("resample_row: pool type does not match row \"" + row.row_id + "\"");
  const std::string& correct = row.correct_answer();

  // Eligible wrong answers, sorted so draws are platform-independent.
  std::vector<std::string> wrongs(pool.answers.begin(), pool.answers.end());
  wrongs.erase(std::remove(wrongs.begin(), wrongs.end(), correct), wrongs.end());
  if (int(wrongs.size()) < 4) return out;

  std::vector<std::string> original_wrongs;
  for (int i = 0; i < 5; ++i) {
    if (i != row.label) original_wrongs.push_back(row.candidates[size_t(i)]);
  }
  std::sort(original_wrongs.begin(), original_wrongs.end());
  const bool original_drawable =
      std::includes(wrongs.begin(), wrongs.end(), original_wrongs.begin(), original_wrongs.end());
  const int64_t n_valid = choose4(int64_t(wrongs.size())) - (original_drawable ? 1 : 0);
  if (n_valid <= 0) return out;

  std::set<std::vector<std::string>> used;
  if (original_drawable) used.insert(original_wrongs);
  std::vector<int> order(wrongs.size());
  const int64_t max_attempts = 64LL * copies + 256;
  for (int64_t attempt = 0; attempt < max_attempts && int(out.size()) < copies; ++attempt) {
    // Partial Fisher-Yates: the first 4 entries are a uniform ordered draw.
    for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);
    for (size_t i = 0; i < 4; ++i)
      std::swap(order[i], order[i + size_t(rng.below(uint64_t(order.size() - i)))]);
    std::vector<std::string> drawn;
    for (size_t i = 0; i < 4; ++i) drawn.push_back(wrongs[size_t(order[i])]);
    std::vector<std::string> canon = drawn;
    std::sort(canon.begin(), canon.end());
    if (!used.insert(canon).second) continue;

    DatasetRow nr = row;
    nr.row_id = row.row_id + "__rs" + std::to_string(out.size() + 1);
    size_t w = 0;
    for (int i = 0; i < 5; ++i) {
      if (i != row.label) nr.candidates[size_t(i)] = drawn[w++];
    }
    nr.provenance.push_back(Provenance::Resampled);
    validate_row(nr);
    out.push_back(std::move(nr));
  }
  return out;
}

AugmentResult augment_split(std::span<const DatasetRow> rows, const PoolMap& pools,
                            FeatureStore& store, const AugmentationPlan& plan) {
  validate_plan(plan);
  for (const auto& row : rows) {
    if (row.split != Split::Train)
      throw validation_error("augment_split: test-split row \"" + row.row_id +
                             "\" must not be augmented");
  }
  const Lexicon lexicon = make_lexicon(plan.lr_lexicon);

  AugmentResult result;
  result.rows.assign(rows.begin(), rows.end());
  result.report.input_rows = int64_t(rows.size());

  if (plan.enable_hflip) {
    StageReport stage{"hflip", int64_t(result.rows.size()), 0, {}};
    std::vector<DatasetRow> added;
    for (const auto& row : result.rows) {
      if (!store.contains(row.clip_id + kHflipSuffix)) {
        store.add(store.flipped(row.clip_id));  // throws io_error when the clip is missing
      }
      added.push_back(hflip_row_text(row, lexicon));
    }
    stage.added_rows = int64_t(added.size());
    result.rows.insert(result.rows.end(), added.begin(), added.end());
    result.report.stages.push_back(std::move(stage));
  }

  if (plan.enable_resample) {
    StageReport stage{"resample", int64_t(result.rows.size()), 0, {}};
    std::vector<DatasetRow> added;
    for (const auto& row : result.rows) {
      auto pit = pools.find(row.qtype);
      if (pit == pools.end()) {
        stage.skips.push_back({row.row_id, "no answer pool for question type"});
        continue;
      }
      Rng rng(stream_seed(plan.seed, row.row_id));
      auto rs = resample_row(row, pit->second, plan.resample_copies, rng);
      if (int(rs.size()) < plan.resample_copies) {
        stage.skips.push_back(
            {row.row_id, "pool supplied " + std::to_string(rs.size()) + " of " +
                             std::to_string(plan.resample_copies) + " distinct wrong-answer tuples"});
      }
      for (auto& r : rs) added.push_back(std::move(r));
    }
    stage.added_rows = int64_t(added.size());
    result.rows.insert(result.rows.end(), added.begin(), added.end());
    result.report.stages.push_back(std::move(stage));
  }

  if (plan.enable_mirror) {
    StageReport stage{"mirror", int64_t(result.rows.size()), 0, {}};
    std::vector<DatasetRow> added;
    for (const auto& row : result.rows) added.push_back(mirror_row(row));
    stage.added_rows = int64_t(added.size());
    result.rows.insert(result.rows.end(), added.begin(), added.end());
    result.report.stages.push_back(std::move(stage));
  }

  result.report.final_rows = int64_t(result.rows.size());
  return result;
}

std::string AugmentationReport::to_json() const {
  json j;
  j["input_rows"] = input_rows;
  j["final_rows"] = final_rows;
  j["stages"] = json::array();
  for (const auto& s : stages) {
    json js;
    js["stage"] = s.stage;
    js["input_rows"] = s.input_rows;
    js["added_rows"] = s.added_rows;
    js["skips"] = json::array();
    for (const auto& sk : s.skips) js["skips"].push_back({{"row_id", sk.row_id}, {"reason", sk.reason}});
    j["stages"].push_back(js);
  }
  return j.dump(2);
}

// ---- plan files ----
//
// TOML-style subset: `key = value` lines, `#` comments, values are booleans,
// integers, quoted strings, or single-line arrays of values.

namespace {

struct TomlValue {
  enum class Kind { Bool, Int, Str, Array } kind = Kind::Bool;
  bool b = false;
  long long i = 0;
  std::string s;
  std::vector<TomlValue> arr;
};

struct TomlParser {
  std::string_view text;
  size_t pos = 0;
  int line;

  void skip_ws() {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  }

  [[noreturn]] void fail(const std::string& msg) {
    throw validation_error("plan:" + std::to_string(line) + ": " + msg);
  }

  TomlValue parse_value() {
    skip_ws();
    if (pos >= text.size()) fail("missing value");
    const char c = text[pos];
    TomlValue v;
    if (c == '[') {
      ++pos;
      v.kind = TomlValue::Kind::Array;
      skip_ws();
      if (pos < text.size() && text[pos] == ']') {
        ++pos;
        return v;
      }
      while (true) {
        v.arr.push_back(parse_value());
        skip_ws();
        if (pos >= text.size()) fail("unterminated array");
        if (text[pos] == ',') {
          ++pos;
          continue;
        }
        if (text[pos] == ']') {
          ++pos;
          return v;
        }
        fail("expected ',' or ']' in array");
      }
    }
    if (c == '"') {
      ++pos;
      v.kind = TomlValue::Kind::Str;
      while (pos < text.size() && text[pos] != '"') {
        if (text[pos] == '\\' && pos + 1 < text.size()) ++pos;
        v.s.push_back(text[pos]);
        ++pos;
      }
      if (pos >= text.size()) fail("unterminated string");
      ++pos;
      return v;
    }
    size_t j = pos;
    while (j < text.size() && text[j] != ',' && text[j] != ']' && text[j] != ' ' &&
           text[j] != '\t' && text[j] != '#')
      ++j;
    std::string word(text.substr(pos, j - pos));
    pos = j;
    if (word == "true" || word == "false") {
      v.kind = TomlValue::Kind::Bool;
      v.b = (word == "true");
      return v;
    }
    try {
      size_t used = 0;
      v.i = std::stoll(word, &used);
      if (used != word.size()) fail("bad value \"" + word + "\"");
      v.kind = TomlValue::Kind::Int;
      return v;
    } catch (const std::exception&) {
      fail("bad value \"" + word + "\"");
    }
  }
};

}  // namespace

AugmentationPlan load_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open plan: " + path.string());
  AugmentationPlan plan;
  plan.lr_lexicon.clear();
  bool lexicon_set = false, copies_set = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    std::string body = hash == std::string::npos ? line : line.substr(0, hash);
    const size_t eq = body.find('=');
    if (body.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (eq == std::string::npos)
      throw validation_error("plan:" + std::to_string(lineno) + ": expected key = value");
    std::string key = body.substr(0, eq);
    key.erase(0, key.find_first_not_of(" \t"));
    key.erase(key.find_last_not_of(" \t\r") + 1);
    TomlParser p{body, eq + 1, lineno};
    TomlValue v = p.parse_value();
    p.skip_ws();
    if (p.pos < p.text.size() && p.text[p.pos] != '\r')
      throw validation_error("plan:" + std::to_string(lineno) + ": trailing characters");

    auto want = [&](TomlValue::Kind k, const char* what) {
      if (v.kind != k)
        throw validation_error("plan:" + std::to_string(lineno) + ": " + key + " must be " + what);
    };
    if (key == "enable_hflip") {
      want(TomlValue::Kind::Bool, "a boolean");
      plan.enable_hflip = v.b;
    } else if (key == "enable_resample") {
      want(TomlValue::Kind::Bool, "a boolean");
      plan.enable_resample = v.b;
    } else if (key == "enable_mirror") {
      want(TomlValue::Kind::Bool, "a boolean");
      plan.enable_mirror = v.b;
    } else if (key == "resample_copies") {
      want(TomlValue::Kind::Int, "an integer");
      plan.resample_copies = int(v.i);
      copies_set = true;
    } else if (key == "seed") {
      want(TomlValue::Kind::Int, "an integer");
      plan.seed = uint64_t(v.i);
    } else if (key == "lr_lexicon") {
      want(TomlValue::Kind::Array, "an array of [from, to] pairs");
      for (const auto& pair : v.arr) {
        if (pair.kind != TomlValue::Kind::Array || pair.arr.size() != 2 ||
            pair.arr[0].kind != TomlValue::Kind::Str || pair.arr[1].kind != TomlValue::Kind::Str)
          throw validation_error("plan:" + std::to_string(lineno) +
                                 ": lr_lexicon entries must be two-element string arrays");
        plan.lr_lexicon.emplace_back(pair.arr[0].s, pair.arr[1].s);
      }
      lexicon_set = true;
    } else {
      throw validation_error("plan:" + std::to_string(lineno) + ": unknown key \"" + key + "\"");
    }
  }
  if (!lexicon_set) plan.lr_lexicon = {{"left", "right"}};
  if (!copies_set) plan.resample_copies = plan.enable_resample ? 1 : 0;
  validate_plan(plan);
  return plan;
}

}  // namespace vqa
