#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "nvae/corpus.hpp"
#include "nvae/matrix.hpp"
#include "nvae/noise.hpp"

namespace nvae {

// Collapsed Gibbs sampler state for the mixture baseline. Documents are
// expanded to a flat token stream; the count tables are kept exactly in sync
// with the per-token assignments.
struct GibbsState {
  std::size_t topic_count = 0;
  std::size_t vocab_size = 0;
  double alpha = 0.1;
  double beta_prior = 0.01;

  std::vector<std::uint32_t> token_word;  // word id per token
  std::vector<std::uint32_t> token_doc;   // document id per token
  std::vector<std::uint32_t> z;           // topic assignment per token

  std::vector<std::uint32_t> n_dk;  // docs x K
  std::vector<std::uint32_t> n_kw;  // K x V
  std::vector<std::uint32_t> n_k;   // K
  std::size_t doc_count = 0;

  std::uint32_t& dk(std::size_t d, std::size_t k) {
    return n_dk[d * topic_count + k];
  }
  std::uint32_t& kw(std::size_t k, std::size_t w) {
    return n_kw[k * vocab_size + w];
  }
  std::uint32_t dk(std::size_t d, std::size_t k) const {
    return n_dk[d * topic_count + k];
  }
  std::uint32_t kw(std::size_t k, std::size_t w) const {
    return n_kw[k * vocab_size + w];
  }

  // Exact recount from z; used by the consistency tests.
  bool counts_consistent() const {
    std::vector<std::uint32_t> dk2(n_dk.size(), 0), kw2(n_kw.size(), 0),
        k2(n_k.size(), 0);
    for (std::size_t i = 0; i < z.size(); ++i) {
      dk2[token_doc[i] * topic_count + z[i]] += 1;
      kw2[z[i] * vocab_size + token_word[i]] += 1;
      k2[z[i]] += 1;
    }
    return dk2 == n_dk && kw2 == n_kw && k2 == n_k;
  }
};

inline GibbsState gibbs_init(const Corpus& corpus, std::size_t topics,
                             double alpha, double beta_prior,
                             std::uint64_t seed) {
  if (topics < 1) throw std::invalid_argument("gibbs_init: topics < 1");
  if (!(alpha > 0.0) || !(beta_prior > 0.0))
    throw std::invalid_argument("gibbs_init: priors must be positive");
  if (corpus.docs.empty()) throw std::invalid_argument("gibbs_init: empty corpus");
  GibbsState state;
  state.topic_count = topics;
  state.vocab_size = corpus.vocab.size();
  state.alpha = alpha;
  state.beta_prior = beta_prior;
  state.doc_count = corpus.docs.size();
  for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
    const SparseDoc& doc = corpus.docs[d];
    for (std::size_t s = 0; s < doc.word_ids.size(); ++s) {
      const auto reps = static_cast<std::size_t>(doc.counts[s]);
      for (std::size_t r = 0; r < reps; ++r) {
        state.token_word.push_back(doc.word_ids[s]);
        state.token_doc.push_back(static_cast<std::uint32_t>(d));
      }
    }
  }
  state.n_dk.assign(state.doc_count * topics, 0);
  state.n_kw.assign(topics * state.vocab_size, 0);
  state.n_k.assign(topics, 0);
  BaseNoise noise(seed, 0x67696262ULL);
  state.z.resize(state.token_word.size());
  for (std::size_t i = 0; i < state.z.size(); ++i) {
    const auto k = static_cast<std::uint32_t>(noise.below(topics));
    state.z[i] = k;
    state.dk(state.token_doc[i], k) += 1;
    state.kw(k, state.token_word[i]) += 1;
    state.n_k[k] += 1;
  }
  return state;
}

// Conditional weight for assigning the current token (already removed from
// the tables) to topic k: (n_dk + alpha) * (n_kw + beta) / (n_k + V beta).
inline double gibbs_conditional(const GibbsState& state, std::size_t d,
                                std::size_t w, std::size_t k) {
  const double vb =
      static_cast<double>(state.vocab_size) * state.beta_prior;
  return (state.dk(d, k) + state.alpha) * (state.kw(k, w) + state.beta_prior) /
         (state.n_k[k] + vb);
}

// One full sweep: every token is resampled once, in document order.
inline void gibbs_sweep(GibbsState& state, BaseNoise& noise) {
  const std::size_t topics = state.topic_count;
  std::vector<double> weights(topics);
  for (std::size_t i = 0; i < state.z.size(); ++i) {
    const std::uint32_t d = state.token_doc[i];
    const std::uint32_t w = state.token_word[i];
    const std::uint32_t old = state.z[i];
    state.dk(d, old) -= 1;
    state.kw(old, w) -= 1;
    state.n_k[old] -= 1;
    double total = 0.0;
    for (std::size_t k = 0; k < topics; ++k) {
      weights[k] = gibbs_conditional(state, d, w, k);
      total += weights[k];
    }
    const double u = noise.uniform() * total;
    double acc = 0.0;
    std::uint32_t pick = static_cast<std::uint32_t>(topics - 1);
    for (std::size_t k = 0; k < topics; ++k) {
      acc += weights[k];
      if (u < acc) {
        pick = static_cast<std::uint32_t>(k);
        break;
      }
    }
    state.z[i] = pick;
    state.dk(d, pick) += 1;
    state.kw(pick, w) += 1;
    state.n_k[pick] += 1;
  }
}

struct GibbsEstimate {
  DenseMatrix theta_hat;  // docs x K
  DenseMatrix phi_hat;    // K x V
};

inline GibbsEstimate gibbs_estimate(const GibbsState& state) {
  GibbsEstimate est;
  const std::size_t topics = state.topic_count;
  est.theta_hat = DenseMatrix(state.doc_count, topics);
  est.phi_hat = DenseMatrix(topics, state.vocab_size);
  std::vector<double> doc_tokens(state.doc_count, 0.0);
  for (std::size_t d = 0; d < state.doc_count; ++d)
    for (std::size_t k = 0; k < topics; ++k) doc_tokens[d] += state.dk(d, k);
  for (std::size_t d = 0; d < state.doc_count; ++d)
    for (std::size_t k = 0; k < topics; ++k)
      est.theta_hat(d, k) =
          (state.dk(d, k) + state.alpha) /
          (doc_tokens[d] + static_cast<double>(topics) * state.alpha);
  const double vb = static_cast<double>(state.vocab_size) * state.beta_prior;
  for (std::size_t k = 0; k < topics; ++k)
    for (std::size_t w = 0; w < state.vocab_size; ++w)
      est.phi_hat(k, w) =
          (state.kw(k, w) + state.beta_prior) / (state.n_k[k] + vb);
  return est;
}

// Cluster id per document: argmax of theta_hat, ties to the lower topic.
inline std::vector<std::uint32_t> gibbs_clusters(const GibbsEstimate& est) {
  std::vector<std::uint32_t> out(est.theta_hat.rows);
  for (std::size_t d = 0; d < est.theta_hat.rows; ++d) {
    std::uint32_t best = 0;
    for (std::size_t k = 1; k < est.theta_hat.cols; ++k)
      if (est.theta_hat(d, k) > est.theta_hat(d, best))
        best = static_cast<std::uint32_t>(k);
    out[d] = best;
  }
  return out;
}

}  // namespace nvae
