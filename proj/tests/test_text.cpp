#include <fstream>

#include "doctest.h"
#include "synth.hpp"
#include "vqa/text.hpp"

using namespace vqa;
using testutil::TempDir;

TEST_CASE("tokenize lowercases and strips punctuation") {
  CHECK(tokenize("What am I doing?") == std::vector<std::string>{"what", "am", "i", "doing"});
  CHECK(tokenize("") == std::vector<std::string>{});
  CHECK(tokenize("man in red clothes") == std::vector<std::string>{"man", "in", "red", "clothes"});
  CHECK(tokenize("red,blue") == std::vector<std::string>{"red", "blue"});
  CHECK(tokenize("  spaced   out  ") == std::vector<std::string>{"spaced", "out"});
}

TEST_CASE("tokenize is idempotent through join") {
  for (const char* text : {"What am I doing?", "one-two three!", "a.b.c", "42 cups"}) {
    const auto once = tokenize(text);
    CHECK(tokenize(join_tokens(once)) == once);
  }
}

TEST_CASE("embed_qa concatenates question then answer rows") {
  const auto table = testutil::synth_embeddings({"what", "am", "i", "doing", "cooking"}, 4, 1);
  const auto seq = embed_qa<double>({"what", "am"}, {"cooking"}, table);
  CHECK(seq.question_len == 2);
  CHECK(seq.answer_len == 1);
  CHECK(seq.matrix.rows() == 3);
  CHECK(seq.matrix.cols() == 4);
  for (int j = 0; j < 4; ++j) {
    CHECK(seq.matrix(0, j) == doctest::Approx(double(table.vectors(table.vocab.at("what"), j))));
    CHECK(seq.matrix(2, j) == doctest::Approx(double(table.vectors(table.vocab.at("cooking"), j))));
  }
}

TEST_CASE("all-OOV input embeds as zeros") {
  const auto table = testutil::synth_embeddings({"known"}, 3, 1);
  const auto seq = embed_qa<float>({"alpha", "beta"}, {"gamma"}, table);
  for (size_t i = 0; i < seq.matrix.size(); ++i) CHECK(seq.matrix.data()[i] == 0.0f);
}

TEST_CASE("question rows are identical across answers") {
  const auto vocab = testutil::synth_vocab(20);
  const auto table = testutil::synth_embeddings(vocab, 6, 2);
  const std::vector<std::string> q{"w00", "w01", "w02"};
  const auto s1 = embed_qa<double>(q, {"w05"}, table);
  const auto s2 = embed_qa<double>(q, {"w06", "w07"}, table);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 6; ++j) CHECK(s1.matrix(i, j) == s2.matrix(i, j));
}

TEST_CASE("embed_qa rejects empty sides") {
  const auto table = testutil::synth_embeddings({"a"}, 2, 1);
  CHECK_THROWS_AS(embed_qa<double>({}, {"a"}, table), validation_error);
  CHECK_THROWS_AS(embed_qa<double>({"a"}, {}, table), validation_error);
}

TEST_CASE("load_embeddings reads the standard text format") {
  TempDir dir;
  const auto path = dir.path() / "emb.txt";
  {
    std::ofstream out(path);
    out << "cat 1 2 3 4\n";
    out << "dog 0.5 -0.5 0.25 -0.25\n";
    out << "cup 0 0 1 0\n";
  }
  const auto table = load_embeddings(path, 4);
  CHECK(table.dim == 4);
  CHECK(table.vocab.size() == 3);
  const float* v = table.lookup("dog");
  REQUIRE(v != nullptr);
  CHECK(v[0] == doctest::Approx(0.5));
  CHECK(v[1] == doctest::Approx(-0.5));
  CHECK(table.lookup("bird") == nullptr);
}

TEST_CASE("load_embeddings width inference and errors") {
  TempDir dir;
  const auto path = dir.path() / "emb.txt";
  {
    std::ofstream out(path);
    out << "cat 1 2 3\n";
    out << "dog 4 5\n";
  }
  CHECK_THROWS_WITH_AS(load_embeddings(path, 4), doctest::Contains("expected 4 values"),
                       validation_error);
  CHECK_THROWS_WITH_AS(load_embeddings(path), doctest::Contains("expected 3 values"),
                       validation_error);

  SUBCASE("duplicate token") {
    std::ofstream out(path);
    out << "cat 1 2\ncat 3 4\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_embeddings(path), doctest::Contains("duplicate token"),
                         validation_error);
  }
  SUBCASE("non-numeric value") {
    std::ofstream out(path);
    out << "cat 1 x\n";
    out.close();
    CHECK_THROWS_AS(load_embeddings(path), validation_error);
  }
}
