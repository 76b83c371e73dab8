#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "nvae/corpus.hpp"
#include "nvae/noise.hpp"

using namespace nvae;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path =
      (std::filesystem::temp_directory_path() / name).string();
  std::ofstream out(path, std::ios::trunc);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("preprocess basic filtering") {
  std::unordered_set<std::string> stop = {"the"};
  SECTION("stopwords, casing and min count") {
    auto r = preprocess({"The the CAT cat cat"}, stop, 3, std::nullopt);
    REQUIRE(r.docs.size() == 1);
    CHECK(r.docs[0] == std::vector<std::string>{"cat", "cat", "cat"});
    CHECK(r.kept_index == std::vector<std::size_t>{0});
  }
  SECTION("rare words removed everywhere") {
    auto r = preprocess({"rare word word word", "rare word"}, {}, 3,
                        std::nullopt);
    REQUIRE(r.docs.size() == 2);
    CHECK(r.docs[0] == std::vector<std::string>{"word", "word", "word"});
    CHECK(r.docs[1] == std::vector<std::string>{"word"});
  }
  SECTION("emptied documents are dropped from the index map") {
    auto r = preprocess({"keep keep keep", "the", "keep"}, stop, 2,
                        std::nullopt);
    REQUIRE(r.docs.size() == 2);
    CHECK(r.kept_index == std::vector<std::size_t>{0, 2});
  }
  SECTION("embedding vocabulary filter") {
    std::unordered_set<std::string> emb = {"dog"};
    auto r = preprocess({"dog cat dog", "dog"}, {}, 1, emb);
    REQUIRE(r.docs.size() == 2);
    CHECK(r.docs[0] == std::vector<std::string>{"dog", "dog"});
  }
}

TEST_CASE("preprocess is idempotent") {
  BaseNoise noise(211);
  std::vector<std::string> words = {"alpha", "beta", "gamma", "delta", "eps",
                                    "zeta", "theta", "iota"};
  std::vector<std::string> raw;
  for (int i = 0; i < 40; ++i) {
    std::string line;
    const std::size_t len = 1 + noise.below(9);
    for (std::size_t j = 0; j < len; ++j) {
      if (j) line += ' ';
      line += words[noise.below(words.size())];
    }
    raw.push_back(line);
  }
  std::unordered_set<std::string> stop = {"zeta"};
  auto first = preprocess(raw, stop, 3, std::nullopt);
  std::vector<std::string> rejoined;
  for (const auto& doc : first.docs) {
    std::string line;
    for (std::size_t j = 0; j < doc.size(); ++j) {
      if (j) line += ' ';
      line += doc[j];
    }
    rejoined.push_back(line);
  }
  auto second = preprocess(rejoined, stop, 3, std::nullopt);
  CHECK(second.docs == first.docs);
}

TEST_CASE("build_corpus aggregates counts in first-occurrence order") {
  auto corpus = build_corpus({{"a", "b", "a"}});
  REQUIRE(corpus.vocab.size() == 2);
  CHECK(corpus.vocab.id_to_word[0] == "a");
  CHECK(corpus.vocab.id_to_word[1] == "b");
  REQUIRE(corpus.docs.size() == 1);
  CHECK(corpus.docs[0].word_ids == std::vector<std::uint32_t>{0, 1});
  CHECK(corpus.docs[0].counts == std::vector<double>{2.0, 1.0});

  SECTION("disjoint documents add up their vocabularies") {
    auto two = build_corpus({{"x", "y"}, {"p", "q", "r"}});
    CHECK(two.vocab.size() == 5);
  }
  SECTION("label mismatch rejected") {
    CHECK_THROWS_AS(
        build_corpus({{"a"}, {"b"}}, std::vector<std::string>{"l1"}),
        std::invalid_argument);
  }
  SECTION("labels mapped to dense ids by first occurrence") {
    auto lab = build_corpus({{"a"}, {"b"}, {"c"}},
                            std::vector<std::string>{"pos", "neg", "pos"});
    REQUIRE(lab.labels.has_value());
    CHECK(*lab.labels == std::vector<std::int32_t>{0, 1, 0});
    CHECK(lab.label_names == std::vector<std::string>{"pos", "neg"});
  }
}

TEST_CASE("build_corpus token totals match the input") {
  BaseNoise noise(223);
  std::vector<std::vector<std::string>> docs;
  std::size_t total = 0;
  for (int i = 0; i < 50; ++i) {
    std::vector<std::string> doc;
    const std::size_t len = 1 + noise.below(12);
    for (std::size_t j = 0; j < len; ++j)
      doc.push_back("w" + std::to_string(noise.below(30)));
    total += len;
    docs.push_back(std::move(doc));
  }
  auto corpus = build_corpus(docs);
  CHECK(corpus.total_tokens() == Catch::Approx(static_cast<double>(total)));
}

TEST_CASE("corpus accepts microtext-scale input") {
  BaseNoise noise(227);
  std::vector<std::vector<std::string>> docs;
  for (int i = 0; i < 2546; ++i) {
    std::vector<std::string> doc;
    const std::size_t len = 1 + noise.below(9);
    for (std::size_t j = 0; j < len; ++j)
      doc.push_back("w" + std::to_string(noise.below(1402)));
    docs.push_back(std::move(doc));
  }
  auto corpus = build_corpus(docs);
  CHECK(corpus.docs.size() == 2546);
  CHECK(corpus.vocab.size() <= 1402);
}

TEST_CASE("load_embeddings aligns rows to vocabulary ids") {
  Vocabulary vocab;
  vocab.add("cat");
  vocab.add("dog");
  const std::string path = write_temp(
      "nvae_test_emb.txt", "dog 1 2 3\ncat 0.1 0.2 0.3\nextra 9 9 9\n");
  auto load = load_embeddings(path, vocab);
  CHECK(load.matrix.dim == 3);
  CHECK(load.missing.empty());
  CHECK(load.matrix.vectors(0, 0) == Catch::Approx(0.1));
  CHECK(load.matrix.vectors(0, 2) == Catch::Approx(0.3));
  CHECK(load.matrix.vectors(1, 0) == Catch::Approx(1.0));
  std::remove(path.c_str());
}

TEST_CASE("load_embeddings randomized alignment") {
  BaseNoise noise(229);
  for (int trial = 0; trial < 20; ++trial) {
    BaseNoise sub = noise.substream(trial);
    const std::size_t v = 3 + sub.below(10);
    const std::size_t d = 1 + sub.below(5);
    Vocabulary vocab;
    for (std::size_t i = 0; i < v; ++i) vocab.add("word" + std::to_string(i));
    // write entries in a shuffled order
    std::vector<std::size_t> order(v);
    for (std::size_t i = 0; i < v; ++i) order[i] = i;
    for (std::size_t i = v; i > 1; --i)
      std::swap(order[i - 1], order[sub.below(i)]);
    std::string content;
    for (std::size_t i : order) {
      content += "word" + std::to_string(i);
      for (std::size_t j = 0; j < d; ++j)
        content += " " + std::to_string(static_cast<double>(i * 100 + j));
      content += "\n";
    }
    const std::string path = write_temp("nvae_test_emb_rand.txt", content);
    auto load = load_embeddings(path, vocab);
    REQUIRE(load.missing.empty());
    for (std::size_t i = 0; i < v; ++i)
      for (std::size_t j = 0; j < d; ++j)
        CHECK(load.matrix.vectors(i, j) ==
              Catch::Approx(static_cast<double>(i * 100 + j)));
    std::remove(path.c_str());
  }
}

TEST_CASE("load_embeddings error reporting") {
  Vocabulary vocab;
  vocab.add("cat");
  vocab.add("dog");
  SECTION("inconsistent dimension names the line") {
    const std::string path =
        write_temp("nvae_test_emb_bad.txt", "cat 1 2 3\ndog 1 2\n");
    try {
      load_embeddings(path, vocab);
      FAIL("expected parse error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    std::remove(path.c_str());
  }
  SECTION("malformed number names the line") {
    const std::string path =
        write_temp("nvae_test_emb_bad2.txt", "cat 1 2 3\ndog 1 x 3\n");
    CHECK_THROWS_AS(load_embeddings(path, vocab), std::runtime_error);
    std::remove(path.c_str());
  }
  SECTION("missing vocabulary words are reported") {
    const std::string path =
        write_temp("nvae_test_emb_missing.txt", "cat 1 2 3\n");
    auto load = load_embeddings(path, vocab);
    CHECK(load.missing == std::vector<std::string>{"dog"});
    std::remove(path.c_str());
  }
  SECTION("unreadable file") {
    CHECK_THROWS_AS(load_embeddings("/nonexistent/file.txt", vocab),
                    std::runtime_error);
  }
}
