#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "nvae/matrix.hpp"

namespace nvae {

struct Vocabulary {
  std::vector<std::string> id_to_word;
  std::unordered_map<std::string, std::uint32_t> word_to_id;

  std::uint32_t add(const std::string& word) {
    auto it = word_to_id.find(word);
    if (it != word_to_id.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(id_to_word.size());
    id_to_word.push_back(word);
    word_to_id.emplace(word, id);
    return id;
  }

  std::optional<std::uint32_t> lookup(const std::string& word) const {
    auto it = word_to_id.find(word);
    if (it == word_to_id.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const { return id_to_word.size(); }
};

// Bag-of-words document: sorted unique word ids with positive counts.
struct SparseDoc {
  std::vector<std::uint32_t> word_ids;
  std::vector<double> counts;

  double token_count() const {
    double n = 0.0;
    for (double c : counts) n += c;
    return n;
  }
};

struct Corpus {
  std::vector<SparseDoc> docs;
  std::optional<std::vector<std::int32_t>> labels;
  std::vector<std::string> label_names;
  Vocabulary vocab;

  double total_tokens() const {
    double n = 0.0;
    for (const auto& d : docs) n += d.token_count();
    return n;
  }
};

struct EmbeddingMatrix {
  DenseMatrix vectors;  // V x D, aligned to vocabulary ids
  std::size_t dim = 0;
};

struct PreprocessResult {
  std::vector<std::vector<std::string>> docs;  // kept documents, in order
  std::vector<std::size_t> kept_index;         // original line of each kept doc
};

inline std::string lowercase(std::string s) {
  for (char& c : s)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return s;
}

inline std::vector<std::string> split_whitespace(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(std::move(tok));
  return out;
}

// Lowercase + whitespace tokenization, stopword removal, optional filtering
// to words covered by the embedding vocabulary, removal of words whose
// corpus frequency is below min_count, and dropping of emptied documents.
inline PreprocessResult preprocess(
    const std::vector<std::string>& raw_docs,
    const std::unordered_set<std::string>& stopwords, std::size_t min_count,
    const std::optional<std::unordered_set<std::string>>& embedding_vocab) {
  std::vector<std::vector<std::string>> tokenized;
  tokenized.reserve(raw_docs.size());
  std::unordered_map<std::string, std::size_t> freq;
  for (const std::string& line : raw_docs) {
    std::vector<std::string> kept;
    for (std::string& tok : split_whitespace(lowercase(line))) {
      if (stopwords.count(tok)) continue;
      if (embedding_vocab && !embedding_vocab->count(tok)) continue;
      kept.push_back(std::move(tok));
    }
    for (const std::string& tok : kept) ++freq[tok];
    tokenized.push_back(std::move(kept));
  }
  PreprocessResult result;
  for (std::size_t i = 0; i < tokenized.size(); ++i) {
    std::vector<std::string> doc;
    for (std::string& tok : tokenized[i])
      if (freq[tok] >= min_count) doc.push_back(std::move(tok));
    if (doc.empty()) continue;
    result.docs.push_back(std::move(doc));
    result.kept_index.push_back(i);
  }
  return result;
}

// Vocabulary in first-occurrence order, counts aggregated per document.
inline Corpus build_corpus(
    const std::vector<std::vector<std::string>>& token_docs,
    const std::optional<std::vector<std::string>>& labels = std::nullopt) {
  if (token_docs.empty())
    throw std::invalid_argument("build_corpus: no documents");
  if (labels && labels->size() != token_docs.size())
    throw std::invalid_argument("build_corpus: label count " +
                                std::to_string(labels->size()) +
                                " does not match document count " +
                                std::to_string(token_docs.size()));
  Corpus corpus;
  for (const auto& tokens : token_docs) {
    if (tokens.empty())
      throw std::invalid_argument("build_corpus: empty document");
    std::unordered_map<std::uint32_t, double> counts;
    for (const std::string& tok : tokens) ++counts[corpus.vocab.add(tok)];
    SparseDoc doc;
    doc.word_ids.reserve(counts.size());
    for (const auto& [id, _] : counts) doc.word_ids.push_back(id);
    std::sort(doc.word_ids.begin(), doc.word_ids.end());
    doc.counts.reserve(counts.size());
    for (std::uint32_t id : doc.word_ids) doc.counts.push_back(counts.at(id));
    corpus.docs.push_back(std::move(doc));
  }
  if (labels) {
    std::unordered_map<std::string, std::int32_t> ids;
    std::vector<std::int32_t> out;
    out.reserve(labels->size());
    for (const std::string& name : *labels) {
      auto it = ids.find(name);
      if (it == ids.end()) {
        it = ids.emplace(name, static_cast<std::int32_t>(corpus.label_names.size()))
                 .first;
        corpus.label_names.push_back(name);
      }
      out.push_back(it->second);
    }
    corpus.labels = std::move(out);
  }
  return corpus;
}

struct EmbeddingLoad {
  EmbeddingMatrix matrix;
  std::vector<std::string> missing;  // vocab words absent from the file
};

// Text format: one entry per line, the word followed by D decimal numbers.
// Rows are returned aligned to the vocabulary ids; a consistent dimension is
// enforced and parse failures name the offending line.
inline EmbeddingLoad load_embeddings(const std::string& path,
                                     const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_embeddings: cannot open " + path);
  std::size_t dim = 0;
  std::vector<bool> seen(vocab.size(), false);
  DenseMatrix vectors;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    std::vector<double> values;
    double v;
    while (ss >> v) values.push_back(v);
    if (!ss.eof())
      throw std::runtime_error("load_embeddings: malformed number at line " +
                               std::to_string(line_no) + " of " + path);
    if (values.empty())
      throw std::runtime_error("load_embeddings: no values at line " +
                               std::to_string(line_no) + " of " + path);
    if (dim == 0) {
      dim = values.size();
      vectors = DenseMatrix(vocab.size(), dim, 0.0);
    } else if (values.size() != dim) {
      throw std::runtime_error(
          "load_embeddings: dimension mismatch at line " +
          std::to_string(line_no) + " of " + path + " (expected " +
          std::to_string(dim) + ", got " + std::to_string(values.size()) + ")");
    }
    auto id = vocab.lookup(word);
    if (!id) continue;
    seen[*id] = true;
    for (std::size_t j = 0; j < dim; ++j) vectors(*id, j) = values[j];
  }
  if (dim == 0)
    throw std::runtime_error("load_embeddings: no entries in " + path);
  EmbeddingLoad out;
  out.matrix.vectors = std::move(vectors);
  out.matrix.dim = dim;
  for (std::size_t i = 0; i < vocab.size(); ++i)
    if (!seen[i]) out.missing.push_back(vocab.id_to_word[i]);
  return out;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline std::vector<std::vector<std::string>> read_token_docs(
    const std::string& path) {
  std::vector<std::vector<std::string>> docs;
  for (const std::string& line : read_lines(path))
    docs.push_back(split_whitespace(line));
  while (!docs.empty() && docs.back().empty()) docs.pop_back();
  return docs;
}

inline std::unordered_set<std::string> read_word_set(const std::string& path) {
  std::unordered_set<std::string> words;
  for (const std::string& line : read_lines(path))
    for (const std::string& tok : split_whitespace(line)) words.insert(tok);
  return words;
}

}  // namespace nvae
