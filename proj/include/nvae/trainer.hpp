#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nvae/corpus.hpp"
#include "nvae/model.hpp"
#include "nvae/optimizer.hpp"

namespace nvae {

struct TrainConfig {
  std::size_t topics = 0;
  std::size_t epochs = 128;
  std::size_t batch_size = 256;
  std::size_t burn_in_epochs = 64;  // epochs before alpha starts training
  double min_temperature = 0.7;
  std::vector<std::size_t> layer_sizes = {128, 128};
  double learning_rate = 8e-3;
  double adam_beta1 = 0.0;
  double adam_beta2 = 0.99;
  double adam_eps = 1e-8;
  bool train_embeddings = false;
  std::uint64_t seed = 1;
  bool bn_fc_enabled = true;
  bool bn_beta_enabled = true;
  bool diagnostics = false;

  void validate() const {
    if (topics == 0) throw std::invalid_argument("TrainConfig: topics == 0");
    if (epochs == 0) throw std::invalid_argument("TrainConfig: epochs == 0");
    if (burn_in_epochs > epochs)
      throw std::invalid_argument("TrainConfig: burn-in exceeds epochs");
    if (!(min_temperature > 0.0) || min_temperature > 1.0)
      throw std::invalid_argument("TrainConfig: min temperature outside (0, 1]");
    if (batch_size < 2)
      throw std::invalid_argument("TrainConfig: batch size below 2");
  }
};

// Warm-up schedule: over the first epoch the learning rate rises linearly
// from 0 to its target while the temperature falls linearly from 1 to its
// minimum; both are constant afterwards.
inline std::pair<double, double> schedule_at(const TrainConfig& config,
                                             std::size_t steps_per_epoch,
                                             std::uint64_t step) {
  if (steps_per_epoch == 0)
    throw std::invalid_argument("schedule_at: steps_per_epoch unknown");
  if (step >= steps_per_epoch)
    return {config.learning_rate, config.min_temperature};
  const double frac =
      steps_per_epoch == 1
          ? 1.0
          : static_cast<double>(step) / static_cast<double>(steps_per_epoch - 1);
  const double lr = config.learning_rate * frac;
  const double tau = 1.0 - frac * (1.0 - config.min_temperature);
  return {lr, tau};
}

// One record per epoch: batch means of the loss and of each objective term.
struct EpochRecord {
  std::size_t epoch = 0;
  std::uint64_t step = 0;  // global step after the epoch
  double loss = 0.0;
  double entropy_term = 0.0;
  double kl_term = 0.0;
  double rec_term = 0.0;
  double eta_logtheta_term = 0.0;
  double lr = 0.0;
  double tau = 0.0;
  std::vector<double> alpha;
};

// One record per step when diagnostics are on.
struct StepRecord {
  std::size_t epoch = 0;
  std::uint64_t step = 0;
  double loss = 0.0;
  std::vector<double> beta_grad_norms;  // per-topic L2 of the score gradient
  std::vector<double> alpha;
  double fc_grad_norm = 0.0;  // L2 of the last dense layer's weight gradient
};

struct TrainResult {
  ModelParams params;
  AdamState adam;
  ScheduleState schedule;
  std::vector<EpochRecord> epochs;
  std::vector<StepRecord> steps;  // populated when diagnostics are enabled
};

namespace train_detail {

// Seeded Fisher-Yates; independent of std::shuffle so runs are reproducible
// across standard libraries.
inline void shuffle_indices(std::vector<std::size_t>& idx, BaseNoise noise) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(noise.below(i));
    std::swap(idx[i - 1], idx[j]);
  }
}

// Batch boundaries over n documents. A trailing batch smaller than 2 is
// merged into the previous one so batch normalization always sees at least
// two rows.
inline std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(
    std::size_t n, std::size_t batch_size) {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (std::size_t start = 0; start < n; start += batch_size)
    ranges.emplace_back(start, std::min(start + batch_size, n));
  if (ranges.size() >= 2 && ranges.back().second - ranges.back().first < 2) {
    ranges[ranges.size() - 2].second = ranges.back().second;
    ranges.pop_back();
  }
  return ranges;
}

}  // namespace train_detail

// Full optimization loop: per-epoch reshuffle, first-epoch warm-up, Adam
// updates, alpha burn-in, and optional per-step diagnostics. Deterministic
// given (corpus, config, seed).
inline TrainResult train(const Corpus& corpus, const EmbeddingMatrix& embeddings,
                         const TrainConfig& config) {
  config.validate();
  if (corpus.docs.empty()) throw std::invalid_argument("train: empty corpus");
  if (corpus.docs.size() < 2)
    throw std::invalid_argument("train: need at least 2 documents");
  if (embeddings.vectors.rows != corpus.vocab.size())
    throw std::invalid_argument(
        "train: embedding rows do not match vocabulary size");
  if (embeddings.dim == 0 || embeddings.vectors.cols != embeddings.dim)
    throw std::invalid_argument("train: inconsistent embedding dimension");

  TrainResult result;
  result.params = make_model_params(embeddings, config.topics,
                                    config.layer_sizes, config.seed);
  result.params.bn_fc_enabled = config.bn_fc_enabled;
  result.params.bn_beta_enabled = config.bn_beta_enabled;
  result.params.train_embeddings = config.train_embeddings;

  auto refs = result.params.tensor_refs(false);
  result.adam = AdamState::like(refs);
  const AdamHyper hyper{config.adam_beta1, config.adam_beta2, config.adam_eps};

  const auto ranges =
      train_detail::batch_ranges(corpus.docs.size(), config.batch_size);
  const std::size_t steps_per_epoch = ranges.size();
  result.schedule.steps_per_epoch = steps_per_epoch;

  const BaseNoise root(config.seed);
  std::vector<std::size_t> order(corpus.docs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    train_detail::shuffle_indices(order, root.substream(epoch, 0, 0x73687566ULL));
    const bool alpha_trainable = epoch > config.burn_in_epochs;
    double sum_loss = 0.0, sum_entropy = 0.0, sum_kl = 0.0, sum_rec = 0.0,
           sum_elt = 0.0;
    for (std::size_t bi = 0; bi < ranges.size(); ++bi) {
      const auto [lr, tau] =
          schedule_at(config, steps_per_epoch, result.schedule.global_step);
      std::vector<std::size_t> batch_idx(order.begin() + ranges[bi].first,
                                         order.begin() + ranges[bi].second);
      DocBatch batch = DocBatch::from_corpus(corpus, batch_idx);
      const BaseNoise noise = root.substream(epoch, bi, 0x6261746bULL);
      ForwardTrace trace = forward_batch(result.params, batch, tau, noise,
                                         BatchNormMode::kTrain);
      ElboResult er = elbo(trace, batch, result.params);
      BackwardOptions bopts;
      bopts.alpha_trainable = alpha_trainable;
      ModelGrads grads;
      try {
        grads = backward(trace, batch, result.params, bopts);
        adam_step(result.adam, refs, grads.tensors, lr, hyper);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error(
            "train: aborted at epoch " + std::to_string(epoch) + " step " +
            std::to_string(result.schedule.global_step) + ": " + e.what());
      }
      commit_bn_updates(result.params, trace);
      result.schedule.lr = lr;
      result.schedule.tau = tau;
      ++result.schedule.global_step;

      const double bsz = static_cast<double>(batch.size());
      double ment = 0.0, mkl = 0.0, mrec = 0.0, melt = 0.0;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        ment += er.entropy[i];
        mkl += er.kl[i];
        mrec += er.rec[i];
        melt += er.eta_logtheta[i];
      }
      sum_loss += er.loss;
      sum_entropy += ment / bsz;
      sum_kl += mkl / bsz;
      sum_rec += mrec / bsz;
      sum_elt += melt / bsz;

      if (config.diagnostics) {
        StepRecord rec;
        rec.epoch = epoch;
        rec.step = result.schedule.global_step;
        rec.loss = er.loss;
        const DenseMatrix& gb = grads.by_name("beta_tilde");
        rec.beta_grad_norms.resize(config.topics, 0.0);
        for (std::size_t t = 0; t < config.topics; ++t) {
          double n2 = 0.0;
          const double* row = gb.row_ptr(t);
          for (std::size_t j = 0; j < gb.cols; ++j) n2 += row[j] * row[j];
          rec.beta_grad_norms[t] = std::sqrt(n2);
        }
        rec.alpha = result.params.alpha();
        const DenseMatrix& gw = grads.by_name("out.weight");
        double n2 = 0.0;
        for (double g : gw.data) n2 += g * g;
        rec.fc_grad_norm = std::sqrt(n2);
        result.steps.push_back(std::move(rec));
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.step = result.schedule.global_step;
    const double ns = static_cast<double>(steps_per_epoch);
    rec.loss = sum_loss / ns;
    rec.entropy_term = sum_entropy / ns;
    rec.kl_term = sum_kl / ns;
    rec.rec_term = sum_rec / ns;
    rec.eta_logtheta_term = sum_elt / ns;
    rec.lr = result.schedule.lr;
    rec.tau = result.schedule.tau;
    rec.alpha = result.params.alpha();
    result.epochs.push_back(std::move(rec));
  }
  return result;
}

}  // namespace nvae
