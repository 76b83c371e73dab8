#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "nvae/batchnorm.hpp"
#include "nvae/corpus.hpp"
#include "nvae/distributions.hpp"
#include "nvae/matrix.hpp"
#include "nvae/noise.hpp"
#include "nvae/special.hpp"

namespace nvae {

// Mini-batch of bag-of-words documents.
struct DocBatch {
  std::vector<SparseDoc> docs;

  static DocBatch from_corpus(const Corpus& corpus,
                              const std::vector<std::size_t>& indices) {
    DocBatch batch;
    batch.docs.reserve(indices.size());
    for (std::size_t idx : indices) batch.docs.push_back(corpus.docs[idx]);
    batch.validate(corpus.vocab.size());
    return batch;
  }

  void validate(std::size_t vocab_size) const {
    if (docs.empty()) throw std::invalid_argument("DocBatch: empty batch");
    for (const SparseDoc& doc : docs) {
      if (doc.word_ids.empty())
        throw std::invalid_argument("DocBatch: empty document");
      if (doc.word_ids.size() != doc.counts.size())
        throw std::invalid_argument("DocBatch: ids/counts length mismatch");
      for (std::size_t i = 0; i < doc.word_ids.size(); ++i) {
        if (doc.word_ids[i] >= vocab_size)
          throw std::invalid_argument("DocBatch: word id out of range");
        if (!(doc.counts[i] >= 1.0))
          throw std::invalid_argument("DocBatch: count below 1");
        if (i > 0 && doc.word_ids[i] <= doc.word_ids[i - 1])
          throw std::invalid_argument("DocBatch: duplicate word id in doc");
      }
    }
  }

  std::size_t size() const { return docs.size(); }
};

struct ContextLayer {
  DenseMatrix weight;  // in x out
  DenseMatrix bias;    // 1 x out
  BatchNormState bn;
};

struct TensorRef {
  std::string name;
  DenseMatrix* tensor;
  bool trainable;
};

// All learnable state of the model. The word-topic score matrix is
// normalized per topic before the vocabulary softmax when bn_beta is on;
// that site always uses the current population statistics, so its running
// buffers stay at their initial values.
struct ModelParams {
  std::size_t vocab_size = 0;   // V
  std::size_t embed_dim = 0;    // D
  std::size_t topic_count = 0;  // K
  std::vector<std::size_t> hidden_sizes;
  bool bn_fc_enabled = true;
  bool bn_beta_enabled = true;
  bool train_embeddings = false;

  DenseMatrix omega;  // V x D word embeddings
  DenseMatrix rho;    // K x D topic embeddings
  std::vector<ContextLayer> hidden;
  DenseMatrix out_weight;  // H x K
  DenseMatrix out_bias;    // 1 x K
  DenseMatrix eta_scale;   // 1x1 scalar a in nu = softplus(a * eta + b)
  DenseMatrix eta_shift;   // 1x1 scalar b
  DenseMatrix beta_tilde;  // K x V
  BatchNormState beta_bn;  // K features, population statistics only
  DenseMatrix alpha_hat;   // 1 x K, alpha = softplus(alpha_hat)

  double a() const { return eta_scale(0, 0); }
  double b() const { return eta_shift(0, 0); }

  std::vector<double> alpha() const {
    std::vector<double> v(topic_count);
    for (std::size_t t = 0; t < topic_count; ++t)
      v[t] = std::max(softplus(alpha_hat(0, t)), 1e-6);
    return v;
  }

  // Fixed enumeration order shared by the optimizer and the checkpoint.
  std::vector<TensorRef> tensor_refs(bool include_running_stats = false) {
    std::vector<TensorRef> refs;
    refs.push_back({"omega", &omega, train_embeddings});
    refs.push_back({"rho", &rho, true});
    for (std::size_t l = 0; l < hidden.size(); ++l) {
      const std::string p = "ctx" + std::to_string(l) + ".";
      refs.push_back({p + "weight", &hidden[l].weight, true});
      refs.push_back({p + "bias", &hidden[l].bias, true});
      refs.push_back({p + "bn_gamma", &hidden[l].bn.gamma, true});
      refs.push_back({p + "bn_shift", &hidden[l].bn.shift, true});
      if (include_running_stats) {
        refs.push_back({p + "bn_running_mean", &hidden[l].bn.running_mean, false});
        refs.push_back({p + "bn_running_var", &hidden[l].bn.running_var, false});
      }
    }
    refs.push_back({"out.weight", &out_weight, true});
    refs.push_back({"out.bias", &out_bias, true});
    refs.push_back({"eta_scale", &eta_scale, true});
    refs.push_back({"eta_shift", &eta_shift, true});
    refs.push_back({"beta_tilde", &beta_tilde, true});
    refs.push_back({"beta_bn_gamma", &beta_bn.gamma, true});
    refs.push_back({"beta_bn_shift", &beta_bn.shift, true});
    if (include_running_stats) {
      refs.push_back({"beta_bn_running_mean", &beta_bn.running_mean, false});
      refs.push_back({"beta_bn_running_var", &beta_bn.running_var, false});
    }
    refs.push_back({"alpha_hat", &alpha_hat, true});
    return refs;
  }
};

// Initialization: topic embeddings scaled to the mean word-vector norm so
// initial scores are O(1) relative to the embeddings, score matrix near
// zero, fan-in-scaled uniform context weights, alpha = 0.1.
inline ModelParams make_model_params(const EmbeddingMatrix& embeddings,
                                     std::size_t topics,
                                     const std::vector<std::size_t>& hidden_sizes,
                                     std::uint64_t seed) {
  if (topics == 0) throw std::invalid_argument("make_model_params: K == 0");
  if (embeddings.vectors.rows == 0 || embeddings.dim == 0)
    throw std::invalid_argument("make_model_params: empty embeddings");
  ModelParams p;
  p.vocab_size = embeddings.vectors.rows;
  p.embed_dim = embeddings.dim;
  p.topic_count = topics;
  p.hidden_sizes = hidden_sizes;
  p.omega = embeddings.vectors;

  BaseNoise noise(seed, 0x696e6974ULL);
  double mean_norm = 0.0;
  for (std::size_t i = 0; i < p.vocab_size; ++i) {
    double n2 = 0.0;
    for (std::size_t j = 0; j < p.embed_dim; ++j)
      n2 += p.omega(i, j) * p.omega(i, j);
    mean_norm += std::sqrt(n2);
  }
  mean_norm /= static_cast<double>(p.vocab_size);
  // Topic embeddings start at far-apart word vectors (farthest-point
  // traversal from a random start), scaled so the initial word-topic scores
  // rho . omega are O(1). Seeding the topics in distinct regions of the
  // embedding cloud keeps them from racing for the same word cluster in the
  // first few steps, which is where component collapse starts.
  {
    BaseNoise seed_noise = noise.substream(1);
    const double scale = 2.0 / std::max(mean_norm * mean_norm, 1e-12);
    std::vector<std::size_t> seeds;
    seeds.push_back(seed_noise.below(p.vocab_size));
    std::vector<double> min_d2(p.vocab_size,
                               std::numeric_limits<double>::infinity());
    p.rho = DenseMatrix(topics, p.embed_dim);
    for (std::size_t t = 0; t < topics; ++t) {
      if (t > 0) {
        const double* prev = p.omega.row_ptr(seeds.back());
        std::size_t pick = 0;
        double best = -1.0;
        for (std::size_t w = 0; w < p.vocab_size; ++w) {
          double d2 = 0.0;
          const double* row = p.omega.row_ptr(w);
          for (std::size_t j = 0; j < p.embed_dim; ++j) {
            const double diff = row[j] - prev[j];
            d2 += diff * diff;
          }
          min_d2[w] = std::min(min_d2[w], d2);
          if (min_d2[w] > best) {
            best = min_d2[w];
            pick = w;
          }
        }
        seeds.push_back(pick);
      }
      const double* seed_vec = p.omega.row_ptr(seeds[t]);
      for (std::size_t j = 0; j < p.embed_dim; ++j)
        p.rho(t, j) = scale * seed_vec[j];
    }
  }

  std::size_t in = p.embed_dim;
  std::size_t layer_idx = 0;
  for (std::size_t h : hidden_sizes) {
    ContextLayer layer;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    layer.weight = DenseMatrix::uniform(in, h, -bound, bound,
                                        noise.substream(2, layer_idx));
    layer.bias = DenseMatrix(1, h, 0.0);
    layer.bn = BatchNormState(h);
    p.hidden.push_back(std::move(layer));
    in = h;
    ++layer_idx;
  }
  {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    p.out_weight =
        DenseMatrix::uniform(in, topics, -bound, bound, noise.substream(3));
    p.out_bias = DenseMatrix(1, topics, 0.0);
  }
  p.eta_scale = DenseMatrix(1, 1, 1.0);
  p.eta_shift = DenseMatrix(1, 1, 0.01);
  p.beta_tilde = DenseMatrix::gaussian(topics, p.vocab_size, 0.02,
                                       noise.substream(4));
  p.beta_bn = BatchNormState(topics);
  // Pure population normalization at this site: the guard only protects a
  // zero-variance row, it must not bias the normalized variance.
  p.beta_bn.eps = 1e-12;
  p.alpha_hat = DenseMatrix(1, topics, softplus_inverse(0.1));
  return p;
}

// Per-topic vocabulary distribution and its log, with the optional per-topic
// normalization cached for the backward pass.
struct BetaResult {
  DenseMatrix beta;      // K x V rows on the simplex
  DenseMatrix log_beta;  // K x V
  RowNormCache bn_cache;
  bool bn_used = false;
};

inline BetaResult compute_beta(const ModelParams& params) {
  BetaResult r;
  DenseMatrix y;
  if (params.bn_beta_enabled) {
    y = rownorm_forward(params.beta_tilde, params.beta_bn.gamma,
                        params.beta_bn.shift, params.beta_bn.eps, &r.bn_cache);
    r.bn_used = true;
  } else {
    y = params.beta_tilde;
  }
  const std::size_t k = y.rows, v = y.cols;
  r.beta = DenseMatrix(k, v);
  r.log_beta = DenseMatrix(k, v);
  for (std::size_t t = 0; t < k; ++t) {
    const double* yr = y.row_ptr(t);
    double mx = -INFINITY;
    for (std::size_t j = 0; j < v; ++j) mx = std::max(mx, yr[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < v; ++j) sum += std::exp(yr[j] - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t j = 0; j < v; ++j) {
      r.log_beta(t, j) = yr[j] - lse;
      r.beta(t, j) = std::exp(yr[j] - lse);
    }
  }
  return r;
}

// Everything the backward pass and the tests need from one forward run.
struct ForwardTrace {
  BatchNormMode mode = BatchNormMode::kTrain;
  double tau = 1.0;
  std::vector<std::size_t> slot_offset;  // per doc, into pi/mu rows

  DenseMatrix omega_bar;  // B x D document mean embeddings
  std::vector<DenseMatrix> fc_inputs;   // input of each dense layer (last: out)
  std::vector<DenseMatrix> fc_normed;   // post-BN pre-ReLU per hidden layer
  std::vector<BatchNormCache> fc_bn_cache;
  std::vector<BatchNormUpdate> fc_bn_update;
  DenseMatrix context;  // B x K

  DenseMatrix pi;  // slots x K logits
  DenseMatrix mu;  // slots x K relaxed assignments
  DenseMatrix eta;     // B x K soft counts
  DenseMatrix nu_pre;  // B x K, a * eta + b
  DenseMatrix nu;      // B x K Dirichlet parameters
  DenseMatrix theta;   // B x K document-topic proportions
  std::vector<double> gamma_sum;  // B, only meaningful in train mode

  BetaResult beta;
};

namespace detail {

inline void context_forward(const ModelParams& params, const DenseMatrix& x,
                            BatchNormMode mode, ForwardTrace* trace,
                            DenseMatrix* out) {
  DenseMatrix cur = x;
  for (std::size_t l = 0; l < params.hidden.size(); ++l) {
    const ContextLayer& layer = params.hidden[l];
    if (trace) trace->fc_inputs.push_back(cur);
    DenseMatrix a = matmul(cur, layer.weight);
    for (std::size_t i = 0; i < a.rows; ++i)
      for (std::size_t j = 0; j < a.cols; ++j) a(i, j) += layer.bias(0, j);
    DenseMatrix y;
    if (params.bn_fc_enabled) {
      BatchNormCache cache;
      BatchNormUpdate update;
      y = batchnorm_forward(a, layer.bn, mode,
                            trace ? &cache : nullptr,
                            trace ? &update : nullptr);
      if (trace) {
        trace->fc_bn_cache.push_back(std::move(cache));
        trace->fc_bn_update.push_back(std::move(update));
      }
    } else {
      y = a;
      if (trace) {
        trace->fc_bn_cache.emplace_back();
        trace->fc_bn_update.emplace_back();
      }
    }
    if (trace) trace->fc_normed.push_back(y);
    cur = relu(y);
  }
  if (trace) trace->fc_inputs.push_back(cur);
  DenseMatrix c = matmul(cur, params.out_weight);
  for (std::size_t i = 0; i < c.rows; ++i)
    for (std::size_t j = 0; j < c.cols; ++j) c(i, j) += params.out_bias(0, j);
  *out = std::move(c);
}

}  // namespace detail

// Forward pass over one batch. Train mode draws one relaxed topic assignment
// per distinct word type per document and one Dirichlet sample per document;
// infer mode is noise-free (temperature softmax and normalized nu). The
// trace carries any running-statistic updates instead of applying them.
inline ForwardTrace forward_batch(const ModelParams& params,
                                  const DocBatch& batch, double temperature,
                                  const BaseNoise& noise, BatchNormMode mode) {
  if (!(temperature > 0.0))
    throw std::domain_error("forward_batch: temperature must be positive");
  batch.validate(params.vocab_size);
  const std::size_t b = batch.size();
  const std::size_t k = params.topic_count;
  const std::size_t d = params.embed_dim;

  ForwardTrace trace;
  trace.mode = mode;
  trace.tau = temperature;

  trace.slot_offset.resize(b + 1, 0);
  for (std::size_t i = 0; i < b; ++i)
    trace.slot_offset[i + 1] =
        trace.slot_offset[i] + batch.docs[i].word_ids.size();
  const std::size_t slots = trace.slot_offset[b];

  trace.omega_bar = DenseMatrix(b, d, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    const SparseDoc& doc = batch.docs[i];
    double* row = trace.omega_bar.row_ptr(i);
    double total = 0.0;
    for (std::size_t s = 0; s < doc.word_ids.size(); ++s) {
      const double* w = params.omega.row_ptr(doc.word_ids[s]);
      const double c = doc.counts[s];
      total += c;
      for (std::size_t j = 0; j < d; ++j) row[j] += c * w[j];
    }
    for (std::size_t j = 0; j < d; ++j) row[j] /= total;
  }

  detail::context_forward(params, trace.omega_bar, mode, &trace,
                          &trace.context);

  trace.pi = DenseMatrix(slots, k);
  for (std::size_t i = 0; i < b; ++i) {
    const SparseDoc& doc = batch.docs[i];
    const double* ctx = trace.context.row_ptr(i);
    for (std::size_t s = 0; s < doc.word_ids.size(); ++s) {
      const double* w = params.omega.row_ptr(doc.word_ids[s]);
      double* pi_row = trace.pi.row_ptr(trace.slot_offset[i] + s);
      for (std::size_t t = 0; t < k; ++t) {
        const double* rho_t = params.rho.row_ptr(t);
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += rho_t[j] * w[j];
        pi_row[t] = dot + ctx[t];
      }
    }
  }

  if (mode == BatchNormMode::kTrain) {
    trace.mu = DenseMatrix(slots, k);
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t s = 0; s + trace.slot_offset[i] < trace.slot_offset[i + 1];
           ++s) {
        const std::size_t slot = trace.slot_offset[i] + s;
        BaseNoise sub = noise.substream(i, s, 0x67756d62ULL);
        std::vector<double> logits(trace.pi.row_ptr(slot),
                                   trace.pi.row_ptr(slot) + k);
        auto mu = gumbel_softmax_sample(logits, temperature, sub);
        std::copy(mu.begin(), mu.end(), trace.mu.row_ptr(slot));
      }
    }
  } else {
    trace.mu = softmax_rows(trace.pi, temperature);
  }

  trace.eta = DenseMatrix(b, k, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    const SparseDoc& doc = batch.docs[i];
    double* eta_row = trace.eta.row_ptr(i);
    for (std::size_t s = 0; s < doc.word_ids.size(); ++s) {
      const double* mu_row = trace.mu.row_ptr(trace.slot_offset[i] + s);
      const double c = doc.counts[s];
      for (std::size_t t = 0; t < k; ++t) eta_row[t] += c * mu_row[t];
    }
  }

  trace.nu_pre = DenseMatrix(b, k);
  trace.nu = DenseMatrix(b, k);
  const double a_val = params.a(), b_val = params.b();
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t t = 0; t < k; ++t) {
      const double pre = a_val * trace.eta(i, t) + b_val;
      trace.nu_pre(i, t) = pre;
      trace.nu(i, t) = std::max(softplus(pre), 1e-6);
    }

  trace.theta = DenseMatrix(b, k);
  trace.gamma_sum.assign(b, 0.0);
  if (mode == BatchNormMode::kTrain) {
    for (std::size_t i = 0; i < b; ++i) {
      DirichletParams dp(std::vector<double>(trace.nu.row_ptr(i),
                                             trace.nu.row_ptr(i) + k));
      auto draw =
          dirichlet_sample(dp, noise.substream(i, 0, 0x74686574ULL));
      std::copy(draw.theta.begin(), draw.theta.end(), trace.theta.row_ptr(i));
      trace.gamma_sum[i] = draw.gamma_sum;
    }
  } else {
    for (std::size_t i = 0; i < b; ++i) {
      double sum = 0.0;
      for (std::size_t t = 0; t < k; ++t) sum += trace.nu(i, t);
      for (std::size_t t = 0; t < k; ++t)
        trace.theta(i, t) = trace.nu(i, t) / sum;
      trace.gamma_sum[i] = sum;
    }
  }

  trace.beta = compute_beta(params);
  return trace;
}

struct ElboResult {
  double loss = 0.0;  // mean negative per-document ELBO
  std::vector<double> entropy;       // -sum_i w_i sum_t mu log mu
  std::vector<double> kl;            // KL(Dir(nu) || Dir(alpha))
  std::vector<double> rec;           // sum_i w_i sum_t mu log beta
  std::vector<double> eta_logtheta;  // sum_t eta_t log theta_t

  double elbo_mean() const { return -loss; }
};

// Per-document ELBO assembled from the trace values; the loss is the batch
// mean of the negated ELBO.
inline ElboResult elbo(const ForwardTrace& trace, const DocBatch& batch,
                       const ModelParams& params) {
  const std::size_t b = batch.size();
  const std::size_t k = params.topic_count;
  if (trace.eta.rows != b || trace.slot_offset.size() != b + 1)
    throw std::invalid_argument("elbo: trace does not match batch");
  ElboResult r;
  r.entropy.assign(b, 0.0);
  r.kl.assign(b, 0.0);
  r.rec.assign(b, 0.0);
  r.eta_logtheta.assign(b, 0.0);
  DirichletParams prior(params.alpha());
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const SparseDoc& doc = batch.docs[i];
    double entropy = 0.0, rec = 0.0;
    for (std::size_t s = 0; s < doc.word_ids.size(); ++s) {
      const double* mu = trace.mu.row_ptr(trace.slot_offset[i] + s);
      const double c = doc.counts[s];
      const std::uint32_t w = doc.word_ids[s];
      for (std::size_t t = 0; t < k; ++t) {
        entropy -= c * mu[t] * std::log(std::max(mu[t], 1e-300));
        rec += c * mu[t] * trace.beta.log_beta(t, w);
      }
    }
    DirichletParams post(std::vector<double>(trace.nu.row_ptr(i),
                                             trace.nu.row_ptr(i) + k));
    const double kl = kl_dirichlet(post, prior);
    double eta_logtheta = 0.0;
    for (std::size_t t = 0; t < k; ++t)
      eta_logtheta +=
          trace.eta(i, t) * std::log(std::max(trace.theta(i, t), 1e-300));
    r.entropy[i] = entropy;
    r.kl[i] = kl;
    r.rec[i] = rec;
    r.eta_logtheta[i] = eta_logtheta;
    total += entropy - kl + rec + eta_logtheta;
  }
  r.loss = -total / static_cast<double>(b);
  return r;
}

// Gradients aligned with ModelParams::tensor_refs(false).
struct ModelGrads {
  std::vector<std::string> names;
  std::vector<DenseMatrix> tensors;

  DenseMatrix& by_name(const std::string& name) {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return tensors[i];
    throw std::out_of_range("ModelGrads: no tensor named " + name);
  }
  const DenseMatrix& by_name(const std::string& name) const {
    return const_cast<ModelGrads*>(this)->by_name(name);
  }

  bool all_finite() const {
    for (const DenseMatrix& t : tensors)
      if (!nvae::all_finite(t)) return false;
    return true;
  }
};

struct BackwardOptions {
  bool alpha_trainable = true;
  // The Dirichlet sample path uses implicit reparameterization gradients;
  // tests that compare against finite differences of a pinned sample turn it
  // off because the pathwise derivative of a rejection sampler is not the
  // derivative of the expectation.
  bool include_theta_path = true;
};

inline ModelGrads backward(const ForwardTrace& trace, const DocBatch& batch,
                           ModelParams& params,
                           const BackwardOptions& opts = {}) {
  if (trace.mode != BatchNormMode::kTrain)
    throw std::invalid_argument("backward: trace must come from a train-mode forward");
  const std::size_t b = batch.size();
  const std::size_t k = params.topic_count;
  const std::size_t d = params.embed_dim;
  const std::size_t v = params.vocab_size;
  if (trace.eta.rows != b || trace.slot_offset.size() != b + 1 ||
      trace.slot_offset.back() != trace.mu.rows)
    throw std::invalid_argument("backward: trace does not match batch");

  ModelGrads grads;
  {
    auto refs = params.tensor_refs(false);
    for (const TensorRef& ref : refs) {
      grads.names.push_back(ref.name);
      grads.tensors.emplace_back(ref.tensor->rows, ref.tensor->cols, 0.0);
    }
  }
  DenseMatrix& g_omega = grads.by_name("omega");
  DenseMatrix& g_rho = grads.by_name("rho");
  DenseMatrix& g_out_w = grads.by_name("out.weight");
  DenseMatrix& g_out_b = grads.by_name("out.bias");
  DenseMatrix& g_a = grads.by_name("eta_scale");
  DenseMatrix& g_b = grads.by_name("eta_shift");
  DenseMatrix& g_beta_tilde = grads.by_name("beta_tilde");
  DenseMatrix& g_alpha_hat = grads.by_name("alpha_hat");

  const double scale = -1.0 / static_cast<double>(b);
  const std::vector<double> alpha = params.alpha();
  const DirichletParams prior(alpha);
  const double a_val = params.a();

  DenseMatrix d_context(b, k, 0.0);
  DenseMatrix g_logbeta(k, v, 0.0);
  std::vector<double> d_alpha(k, 0.0);

  std::vector<double> d_nu(k), d_eta(k), d_mu(k), nu_row(k), theta_row(k),
      upstream(k);
  for (std::size_t i = 0; i < b; ++i) {
    const SparseDoc& doc = batch.docs[i];
    for (std::size_t t = 0; t < k; ++t) {
      nu_row[t] = trace.nu(i, t);
      theta_row[t] = trace.theta(i, t);
    }
    const DirichletParams post(nu_row);

    // d loss / d nu: KL term plus (optionally) the Dirichlet sample path.
    {
      auto gq = kl_dirichlet_grad_q(post, prior);
      for (std::size_t t = 0; t < k; ++t) d_nu[t] = -scale * gq[t];
      if (opts.alpha_trainable) {
        auto gp = kl_dirichlet_grad_p(post, prior);
        for (std::size_t t = 0; t < k; ++t) d_alpha[t] += -scale * gp[t];
      }
      if (opts.include_theta_path) {
        for (std::size_t t = 0; t < k; ++t)
          upstream[t] =
              scale * trace.eta(i, t) / std::max(theta_row[t], 1e-300);
        auto gtheta = dirichlet_implicit_grad(post, theta_row,
                                              trace.gamma_sum[i], upstream);
        for (std::size_t t = 0; t < k; ++t) d_nu[t] += gtheta[t];
      }
    }

    // nu = softplus(a * eta + b), clamped below; d eta also picks up the
    // direct eta * log(theta) term.
    for (std::size_t t = 0; t < k; ++t) {
      const double dpre =
          trace.nu(i, t) <= 1e-6 ? 0.0 : d_nu[t] * sigmoid(trace.nu_pre(i, t));
      g_a(0, 0) += dpre * trace.eta(i, t);
      g_b(0, 0) += dpre;
      d_eta[t] = dpre * a_val +
                 scale * std::log(std::max(theta_row[t], 1e-300));
    }

    for (std::size_t s = 0; s < doc.word_ids.size(); ++s) {
      const std::size_t slot = trace.slot_offset[i] + s;
      const double* mu = trace.mu.row_ptr(slot);
      const double c = doc.counts[s];
      const std::uint32_t w = doc.word_ids[s];
      double dot = 0.0;
      for (std::size_t t = 0; t < k; ++t) {
        d_mu[t] = scale * c *
                      (-(std::log(std::max(mu[t], 1e-300)) + 1.0) +
                       trace.beta.log_beta(t, w)) +
                  c * d_eta[t];
        g_logbeta(t, w) += scale * c * mu[t];
        dot += d_mu[t] * mu[t];
      }
      // softmax backward; the Gumbel noise is additive so the Jacobian in
      // the logits is the tempered softmax Jacobian at mu.
      const double* wvec = params.omega.row_ptr(w);
      double* ctx_grad = d_context.row_ptr(i);
      for (std::size_t t = 0; t < k; ++t) {
        const double dpi = mu[t] * (d_mu[t] - dot) / trace.tau;
        ctx_grad[t] += dpi;
        double* rho_grad = g_rho.row_ptr(t);
        for (std::size_t j = 0; j < d; ++j) rho_grad[j] += dpi * wvec[j];
        if (params.train_embeddings) {
          const double* rho_t = params.rho.row_ptr(t);
          double* w_grad = g_omega.row_ptr(w);
          for (std::size_t j = 0; j < d; ++j) w_grad[j] += dpi * rho_t[j];
        }
      }
    }
  }

  // Vocabulary softmax backward per topic, then the per-topic normalization.
  {
    DenseMatrix d_beta_pre(k, v);
    for (std::size_t t = 0; t < k; ++t) {
      const double* g = g_logbeta.row_ptr(t);
      double row_sum = 0.0;
      for (std::size_t j = 0; j < v; ++j) row_sum += g[j];
      const double* beta_row = trace.beta.beta.row_ptr(t);
      double* out = d_beta_pre.row_ptr(t);
      for (std::size_t j = 0; j < v; ++j)
        out[j] = g[j] - beta_row[j] * row_sum;
    }
    if (trace.beta.bn_used) {
      RowNormGrads g = rownorm_backward(d_beta_pre, params.beta_bn.gamma,
                                        trace.beta.bn_cache);
      g_beta_tilde = std::move(g.grad_x);
      grads.by_name("beta_bn_gamma") = std::move(g.grad_gamma);
      grads.by_name("beta_bn_shift") = std::move(g.grad_shift);
    } else {
      g_beta_tilde = std::move(d_beta_pre);
    }
  }

  // Context network backward.
  {
    const DenseMatrix& last_input = trace.fc_inputs.back();
    DenseMatrix d_x;
    matmul_backward(last_input, params.out_weight, d_context, &d_x, &g_out_w);
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t t = 0; t < k; ++t) g_out_b(0, t) += d_context(i, t);
    for (std::size_t l = params.hidden.size(); l-- > 0;) {
      const ContextLayer& layer = params.hidden[l];
      const std::string p = "ctx" + std::to_string(l) + ".";
      DenseMatrix d_pre = relu_backward(trace.fc_normed[l], d_x);
      if (params.bn_fc_enabled) {
        BatchNormGrads g =
            batchnorm_backward(d_pre, layer.bn, trace.fc_bn_cache[l]);
        grads.by_name(p + "bn_gamma") = std::move(g.grad_gamma);
        grads.by_name(p + "bn_shift") = std::move(g.grad_shift);
        d_pre = std::move(g.grad_x);
      }
      DenseMatrix d_in;
      matmul_backward(trace.fc_inputs[l], layer.weight, d_pre, &d_in,
                      &grads.by_name(p + "weight"));
      DenseMatrix& gb = grads.by_name(p + "bias");
      for (std::size_t i = 0; i < d_pre.rows; ++i)
        for (std::size_t j = 0; j < d_pre.cols; ++j) gb(0, j) += d_pre(i, j);
      d_x = std::move(d_in);
    }
    if (params.train_embeddings) {
      for (std::size_t i = 0; i < b; ++i) {
        const SparseDoc& doc = batch.docs[i];
        const double total = doc.token_count();
        const double* dbar = d_x.row_ptr(i);
        for (std::size_t s = 0; s < doc.word_ids.size(); ++s) {
          double* w_grad = g_omega.row_ptr(doc.word_ids[s]);
          const double f = doc.counts[s] / total;
          for (std::size_t j = 0; j < d; ++j) w_grad[j] += f * dbar[j];
        }
      }
    }
  }

  if (opts.alpha_trainable) {
    for (std::size_t t = 0; t < k; ++t) {
      const double ah = params.alpha_hat(0, t);
      g_alpha_hat(0, t) =
          alpha[t] <= 1e-6 ? 0.0 : d_alpha[t] * sigmoid(ah);
    }
  }
  if (!params.train_embeddings) g_omega.fill(0.0);
  return grads;
}

struct InferResult {
  DenseMatrix proportions;            // B x K, rows sum to 1
  std::vector<std::uint32_t> cluster; // argmax topic, ties to lowest index
};

// Noise-free inference: proportions are the normalized Dirichlet parameters
// from an infer-mode forward pass.
inline InferResult infer_theta(const ModelParams& params, const DocBatch& batch,
                               double temperature) {
  BaseNoise unused(0);
  ForwardTrace trace =
      forward_batch(params, batch, temperature, unused, BatchNormMode::kInfer);
  InferResult r;
  r.proportions = trace.theta;
  r.cluster.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::uint32_t best = 0;
    for (std::size_t t = 1; t < params.topic_count; ++t)
      if (r.proportions(i, t) > r.proportions(i, best))
        best = static_cast<std::uint32_t>(t);
    r.cluster[i] = best;
  }
  return r;
}

// Top-n vocabulary ids per topic by beta, descending, ties to the lower id.
inline std::vector<std::vector<std::uint32_t>> export_topic_ids(
    const ModelParams& params, std::size_t top_n) {
  if (top_n > params.vocab_size)
    throw std::invalid_argument("export_topics: top_n exceeds vocabulary size");
  BetaResult beta = compute_beta(params);
  std::vector<std::vector<std::uint32_t>> out(params.topic_count);
  std::vector<std::uint32_t> order(params.vocab_size);
  for (std::size_t t = 0; t < params.topic_count; ++t) {
    std::iota(order.begin(), order.end(), 0u);
    const double* row = beta.beta.row_ptr(t);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) {
                       if (row[a] != row[b]) return row[a] > row[b];
                       return a < b;
                     });
    out[t].assign(order.begin(), order.begin() + top_n);
  }
  return out;
}

inline std::vector<std::vector<std::string>> export_topics(
    const ModelParams& params, const Vocabulary& vocab, std::size_t top_n) {
  if (vocab.size() != params.vocab_size)
    throw std::invalid_argument("export_topics: vocabulary size mismatch");
  auto ids = export_topic_ids(params, top_n);
  std::vector<std::vector<std::string>> out(ids.size());
  for (std::size_t t = 0; t < ids.size(); ++t)
    for (std::uint32_t id : ids[t]) out[t].push_back(vocab.id_to_word[id]);
  return out;
}

// Applies the running-statistic updates recorded by a train-mode forward.
inline void commit_bn_updates(ModelParams& params, const ForwardTrace& trace) {
  if (!params.bn_fc_enabled) return;
  if (trace.fc_bn_update.size() != params.hidden.size())
    throw std::invalid_argument("commit_bn_updates: trace mismatch");
  for (std::size_t l = 0; l < params.hidden.size(); ++l) {
    params.hidden[l].bn.running_mean = trace.fc_bn_update[l].running_mean;
    params.hidden[l].bn.running_var = trace.fc_bn_update[l].running_var;
  }
}

}  // namespace nvae
