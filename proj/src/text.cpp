#include "vqa/text.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace vqa {

namespace {

inline bool word_byte(unsigned char c) {
  return std::isalnum(c) || c >= 0x80;  // keep UTF-8 continuation bytes intact
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (word_byte(c)) {
      cur.push_back(char(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, int expected_dim) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open embeddings: " + path.string());
  EmbeddingTable table;
  std::vector<float> flat;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token))
      throw validation_error("embeddings:" + std::to_string(lineno) + ": unreadable line");
    std::vector<float> vec;
    double v;
    while (ls >> v) vec.push_back(float(v));
    if (!ls.eof())
      throw validation_error("embeddings:" + std::to_string(lineno) + ": non-numeric value");
    if (table.dim == 0) {
      table.dim = expected_dim > 0 ? expected_dim : int(vec.size());
      if (table.dim < 1)
        throw validation_error("embeddings:" + std::to_string(lineno) + ": no vector values");
    }
    if (int(vec.size()) != table.dim)
      throw validation_error("embeddings:" + std::to_string(lineno) + ": expected " +
                             std::to_string(table.dim) + " values, got " +
                             std::to_string(vec.size()));
    if (!table.vocab.emplace(token, int(table.vocab.size())).second)
      throw validation_error("embeddings:" + std::to_string(lineno) + ": duplicate token \"" +
                             token + "\"");
    flat.insert(flat.end(), vec.begin(), vec.end());
  }
  const int v_count = int(table.vocab.size());
  table.vectors = Matrix<float>(v_count, table.dim == 0 ? 1 : table.dim);
  if (table.dim == 0) table.dim = 1;  // empty file: degenerate but well-formed
  for (int i = 0; i < v_count; ++i)
    for (int j = 0; j < table.dim; ++j) table.vectors(i, j) = flat[size_t(i) * table.dim + j];
  return table;
}

}  // namespace vqa
