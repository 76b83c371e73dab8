#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "nvae/distributions.hpp"
#include "nvae/matrix.hpp"
#include "nvae/noise.hpp"

namespace nvae {

struct SynthConfig {
  std::size_t topics = 3;
  std::size_t docs_per_topic = 200;
  std::size_t doc_length = 12;
  std::size_t vocab_per_topic = 100;
  std::size_t embed_dim = 10;
  double separation = 5.0;
  double proportion_alpha = 0.1;
  std::uint64_t seed = 7;

  void validate() const {
    if (topics < 1 || docs_per_topic < 1 || doc_length < 1 ||
        vocab_per_topic < 1 || embed_dim < 1)
      throw std::invalid_argument("SynthConfig: all counts must be >= 1");
    if (separation < 0.0)
      throw std::invalid_argument("SynthConfig: separation must be >= 0");
  }
};

struct SynthData {
  std::vector<std::vector<std::string>> docs;
  std::vector<std::int32_t> labels;       // planted topic per document
  std::vector<std::string> words;         // full generator vocabulary
  DenseMatrix embeddings;                 // words x embed_dim
};

// Planted-topic corpus: K disjoint vocabularies whose word vectors form K
// Gaussian clusters with centers `separation` apart, and documents generated
// by sampling a sparse topic mixture, then per token a topic and a word from
// that topic's block. The mixture is drawn symmetric and its components are
// swapped so the planted topic is the argmax, which keeps the label honest.
inline SynthData synth_corpus(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t k = cfg.topics;
  const std::size_t v = k * cfg.vocab_per_topic;
  SynthData data;
  BaseNoise root(cfg.seed, 0x73796e74ULL);

  data.words.reserve(v);
  for (std::size_t w = 0; w < v; ++w)
    data.words.push_back("w" + std::to_string(w));

  // Cluster centers on scaled coordinate axes, then recentered so their
  // centroid is the origin: pairwise distances stay `separation`, and the
  // embedding cloud has roughly zero mean like real pretrained vectors.
  DenseMatrix centers(k, cfg.embed_dim, 0.0);
  const double radius = cfg.separation / std::sqrt(2.0);
  for (std::size_t t = 0; t < k; ++t) {
    const std::size_t axis = t % cfg.embed_dim;
    centers(t, axis) += radius * (1.0 + static_cast<double>(t / cfg.embed_dim));
  }
  for (std::size_t j = 0; j < cfg.embed_dim; ++j) {
    double mean = 0.0;
    for (std::size_t t = 0; t < k; ++t) mean += centers(t, j);
    mean /= static_cast<double>(k);
    for (std::size_t t = 0; t < k; ++t) centers(t, j) -= mean;
  }
  data.embeddings = DenseMatrix(v, cfg.embed_dim);
  {
    BaseNoise enoise = root.substream(1);
    for (std::size_t w = 0; w < v; ++w) {
      const std::size_t t = w / cfg.vocab_per_topic;
      for (std::size_t j = 0; j < cfg.embed_dim; ++j)
        data.embeddings(w, j) = centers(t, j) + enoise.normal();
    }
  }

  const DirichletParams mix(
      std::vector<double>(k, cfg.proportion_alpha));
  std::vector<std::size_t> z(cfg.doc_length);
  std::vector<std::size_t> topic_tokens(k);
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t n = 0; n < cfg.docs_per_topic; ++n) {
      BaseNoise dnoise = root.substream(2, t, n);
      std::vector<double> theta = dirichlet_sample(mix, dnoise).theta;
      BaseNoise wnoise = dnoise.substream(3);
      std::fill(topic_tokens.begin(), topic_tokens.end(), 0);
      for (std::size_t pos = 0; pos < cfg.doc_length; ++pos) {
        const double u = wnoise.uniform();
        double acc = 0.0;
        std::size_t zi = k - 1;
        for (std::size_t j = 0; j < k; ++j) {
          acc += theta[j];
          if (u < acc) {
            zi = j;
            break;
          }
        }
        z[pos] = zi;
        ++topic_tokens[zi];
      }
      // Exchangeability of the symmetric mixture and the disjoint blocks
      // lets us transpose topic identities: the relabeled document is still
      // a draw from the generative process, conditioned on its realized
      // majority topic being the planted one.
      std::size_t majority = 0;
      for (std::size_t j = 1; j < k; ++j)
        if (topic_tokens[j] > topic_tokens[majority]) majority = j;
      std::vector<std::string> doc;
      doc.reserve(cfg.doc_length);
      for (std::size_t pos = 0; pos < cfg.doc_length; ++pos) {
        std::size_t zi = z[pos];
        if (zi == majority)
          zi = t;
        else if (zi == t)
          zi = majority;
        const std::size_t w =
            zi * cfg.vocab_per_topic + wnoise.below(cfg.vocab_per_topic);
        doc.push_back(data.words[w]);
      }
      data.docs.push_back(std::move(doc));
      data.labels.push_back(static_cast<std::int32_t>(t));
    }
  }
  return data;
}

}  // namespace nvae
