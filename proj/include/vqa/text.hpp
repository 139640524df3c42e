#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vqa/common.hpp"
#include "vqa/matrix.hpp"

namespace vqa {

// Lowercases ASCII letters and splits on runs of non-alphanumeric bytes.
// Bytes >= 0x80 are kept as word characters so UTF-8 text passes through.
std::vector<std::string> tokenize(std::string_view text);

std::string join_tokens(const std::vector<std::string>& tokens);

// Word-vector table in the standard text format: `token v1 ... vE` per line.
struct EmbeddingTable {
  int dim = 0;                                 // E
  std::unordered_map<std::string, int> vocab;  // token -> row in vectors
  Matrix<float> vectors;                       // V × E

  const float* lookup(const std::string& token) const {
    auto it = vocab.find(token);
    return it == vocab.end() ? nullptr : &vectors(it->second, 0);
  }
};

// expected_dim < 0 infers E from the first line.
EmbeddingTable load_embeddings(const std::filesystem::path& path, int expected_dim = -1);

// Question tokens followed by answer tokens, with their stacked embeddings.
template <typename T>
struct EmbeddedSequence {
  std::vector<std::string> tokens;
  Matrix<T> matrix;      // L × E, L = question_len + answer_len
  int question_len = 0;  // m
  int answer_len = 0;    // n
};

// Rows 0..m-1 are the question token vectors, rows m..L-1 the answer's.
// Out-of-vocabulary tokens embed as the zero vector.
template <typename T>
EmbeddedSequence<T> embed_qa(const std::vector<std::string>& q_tokens,
                             const std::vector<std::string>& a_tokens,
                             const EmbeddingTable& table) {
  if (q_tokens.empty()) throw validation_error("embed_qa: question has no tokens");
  if (a_tokens.empty()) throw validation_error("embed_qa: answer has no tokens");
  EmbeddedSequence<T> seq;
  seq.question_len = int(q_tokens.size());
  seq.answer_len = int(a_tokens.size());
  const int l = seq.question_len + seq.answer_len;
  seq.matrix = Matrix<T>(l, table.dim);
  seq.tokens.reserve(size_t(l));
  int r = 0;
  for (const auto* list : {&q_tokens, &a_tokens}) {
    for (const auto& tok : *list) {
      seq.tokens.push_back(tok);
      if (const float* v = table.lookup(tok)) {
        for (int j = 0; j < table.dim; ++j) seq.matrix(r, j) = T(v[j]);
      }
      ++r;
    }
  }
  return seq;
}

}  // namespace vqa
