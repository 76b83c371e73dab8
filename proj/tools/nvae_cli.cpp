// Command-line frontend: preprocessing, training, the Gibbs baseline,
// inference, topic export, evaluation metrics, batch-norm diagnostics, and
// the planted-topic corpus generator.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nvae/checkpoint.hpp"
#include "nvae/corpus.hpp"
#include "nvae/eval.hpp"
#include "nvae/gibbs.hpp"
#include "nvae/io.hpp"
#include "nvae/manifest.hpp"
#include "nvae/model.hpp"
#include "nvae/synth.hpp"
#include "nvae/trainer.hpp"

namespace {

using namespace nvae;

std::vector<std::size_t> parse_layers(const std::string& spec) {
  std::vector<std::size_t> sizes;
  if (spec.empty() || spec == "none") return sizes;
  std::size_t pos = 0;
  while (pos < spec.size()) {
    const std::size_t comma = spec.find(',', pos);
    const std::string tok = spec.substr(
        pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      const unsigned long v = std::stoul(tok);
      if (v == 0) throw std::invalid_argument("zero");
      sizes.push_back(v);
    } catch (const std::exception&) {
      throw std::runtime_error("--layers: bad layer size '" + tok + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return sizes;
}

Corpus load_token_corpus(const std::string& path,
                         const std::optional<std::string>& labels_path) {
  auto docs = read_token_docs(path);
  if (docs.empty()) throw std::runtime_error("corpus file " + path + " is empty");
  for (std::size_t i = 0; i < docs.size(); ++i)
    if (docs[i].empty())
      throw std::runtime_error("corpus file " + path + " has an empty document at line " +
                               std::to_string(i + 1));
  std::optional<std::vector<std::string>> labels;
  if (labels_path) {
    auto lines = read_lines(*labels_path);
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    labels = std::move(lines);
  }
  return build_corpus(docs, labels);
}

EmbeddingMatrix load_aligned_embeddings(const std::string& path,
                                        const Corpus& corpus) {
  auto load = load_embeddings(path, corpus.vocab);
  if (!load.missing.empty())
    throw std::runtime_error("embeddings file " + path + " is missing " +
                             std::to_string(load.missing.size()) +
                             " vocabulary words (first: " + load.missing[0] +
                             ")");
  return load.matrix;
}

// Documents mapped onto a checkpoint vocabulary. Out-of-vocabulary tokens
// are dropped; a document with no known tokens is an error.
DocBatch docs_for_checkpoint(const std::vector<std::vector<std::string>>& docs,
                             const Vocabulary& vocab) {
  DocBatch batch;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    std::unordered_map<std::uint32_t, double> counts;
    for (const std::string& tok : docs[i]) {
      auto id = vocab.lookup(tok);
      if (id) ++counts[*id];
    }
    if (counts.empty())
      throw std::runtime_error(
          "document at line " + std::to_string(i + 1) +
          " has no tokens covered by the checkpoint vocabulary");
    SparseDoc doc;
    for (const auto& [id, _] : counts) doc.word_ids.push_back(id);
    std::sort(doc.word_ids.begin(), doc.word_ids.end());
    for (std::uint32_t id : doc.word_ids) doc.counts.push_back(counts.at(id));
    batch.docs.push_back(std::move(doc));
  }
  return batch;
}

TrainConfig shared_train_config(CLI::App* cmd, std::string& layers_spec) {
  TrainConfig config;
  cmd->add_option("--topics", config.topics, "number of topics K")->required();
  cmd->add_option("--epochs", config.epochs, "training epochs");
  cmd->add_option("--batch-size", config.batch_size, "mini-batch size");
  cmd->add_option("--burn-in-epochs", config.burn_in_epochs,
                  "epochs before the prior concentration starts training "
                  "(default: half the epochs)");
  cmd->add_option("--min-tau", config.min_temperature,
                  "final relaxation temperature");
  cmd->add_option("--layers", layers_spec,
                  "comma-separated hidden layer sizes, or 'none'");
  cmd->add_option("--lr", config.learning_rate, "peak learning rate");
  cmd->add_flag("--train-embeddings", config.train_embeddings,
                "update word embeddings during training");
  cmd->add_option("--seed", config.seed, "random seed");
  return config;
}

int cmd_prep(const std::string& input, const std::string& stopwords_path,
             std::size_t min_count, const std::string& embeddings_path,
             const std::string& labels_path, const std::string& out,
             const std::string& out_labels, const std::string& out_index) {
  RunManifest manifest;
  manifest.command = "prep";
  manifest.started_utc = RunManifest::now_utc();
  manifest.add_input(input);
  std::unordered_set<std::string> stop;
  if (!stopwords_path.empty()) {
    stop = read_word_set(stopwords_path);
    manifest.add_input(stopwords_path);
  }
  std::optional<std::unordered_set<std::string>> emb_vocab;
  if (!embeddings_path.empty()) {
    std::unordered_set<std::string> words;
    for (const std::string& line : read_lines(embeddings_path)) {
      const std::size_t sp = line.find(' ');
      if (sp != std::string::npos && sp > 0) words.insert(line.substr(0, sp));
    }
    emb_vocab = std::move(words);
    manifest.add_input(embeddings_path);
  }
  auto raw = read_lines(input);
  PreprocessResult result = preprocess(raw, stop, min_count, emb_vocab);
  if (result.docs.empty())
    throw std::runtime_error("prep: no documents survived preprocessing");
  atomic_write_text(out, render_token_docs(result.docs));
  manifest.outputs.push_back(out);
  if (!labels_path.empty()) {
    if (out_labels.empty())
      throw std::runtime_error("prep: --labels requires --out-labels");
    auto labels = read_lines(labels_path);
    manifest.add_input(labels_path);
    std::string filtered;
    for (std::size_t idx : result.kept_index) {
      if (idx >= labels.size())
        throw std::runtime_error("prep: label file " + labels_path +
                                 " is shorter than the corpus");
      filtered += labels[idx];
      filtered += '\n';
    }
    atomic_write_text(out_labels, filtered);
    manifest.outputs.push_back(out_labels);
  }
  if (!out_index.empty()) {
    std::string idx;
    for (std::size_t i : result.kept_index) {
      idx += std::to_string(i);
      idx += '\n';
    }
    atomic_write_text(out_index, idx);
    manifest.outputs.push_back(out_index);
  }
  manifest.config = {{"min_count", min_count},
                     {"embedding_filter", !embeddings_path.empty()},
                     {"stopwords", !stopwords_path.empty()}};
  manifest.finished_utc = RunManifest::now_utc();
  manifest.write(out);
  std::cout << "kept " << result.docs.size() << " of " << raw.size()
            << " documents\n";
  return 0;
}

nlohmann::json config_json(const TrainConfig& config) {
  return {{"topics", config.topics},
          {"epochs", config.epochs},
          {"batch_size", config.batch_size},
          {"burn_in_epochs", config.burn_in_epochs},
          {"min_temperature", config.min_temperature},
          {"layer_sizes", config.layer_sizes},
          {"learning_rate", config.learning_rate},
          {"adam_beta1", config.adam_beta1},
          {"adam_beta2", config.adam_beta2},
          {"adam_eps", config.adam_eps},
          {"train_embeddings", config.train_embeddings},
          {"bn_fc", config.bn_fc_enabled},
          {"bn_beta", config.bn_beta_enabled},
          {"diagnostics", config.diagnostics},
          {"seed", config.seed}};
}

int run_training(TrainConfig config, const std::string& corpus_path,
                 const std::string& embeddings_path, const std::string& out,
                 const std::string& metrics_path, const std::string& command) {
  RunManifest manifest;
  manifest.command = command;
  manifest.started_utc = RunManifest::now_utc();
  manifest.add_input(corpus_path);
  manifest.add_input(embeddings_path);
  manifest.seed = config.seed;
  Corpus corpus = load_token_corpus(corpus_path, std::nullopt);
  EmbeddingMatrix embeddings = load_aligned_embeddings(embeddings_path, corpus);
  TrainResult result = train(corpus, embeddings, config);
  if (!out.empty()) {
    checkpoint_save(out, result.params, corpus.vocab.id_to_word,
                    result.schedule, result.adam);
    manifest.outputs.push_back(out);
  }
  atomic_write_text(metrics_path, render_metrics_log(result));
  manifest.outputs.push_back(metrics_path);
  manifest.config = config_json(config);
  manifest.finished_utc = RunManifest::now_utc();
  manifest.write(out.empty() ? metrics_path : out);
  std::printf("final loss %.6f after %zu epochs\n", result.epochs.back().loss,
              result.epochs.size());
  return 0;
}

int cmd_gibbs(const std::string& corpus_path, std::size_t topics,
              std::size_t sweeps, double alpha, double beta_prior,
              std::uint64_t seed, std::size_t top_n,
              const std::string& out_theta, const std::string& out_topics,
              const std::string& out_clusters) {
  RunManifest manifest;
  manifest.command = "gibbs";
  manifest.started_utc = RunManifest::now_utc();
  manifest.add_input(corpus_path);
  manifest.seed = seed;
  Corpus corpus = load_token_corpus(corpus_path, std::nullopt);
  GibbsState state = gibbs_init(corpus, topics, alpha, beta_prior, seed);
  BaseNoise noise(seed, 0x73776565ULL);
  for (std::size_t s = 0; s < sweeps; ++s) gibbs_sweep(state, noise);
  GibbsEstimate est = gibbs_estimate(state);
  std::string primary;
  if (!out_theta.empty()) {
    atomic_write_text(out_theta, render_theta(est.theta_hat));
    manifest.outputs.push_back(out_theta);
    primary = out_theta;
  }
  if (!out_topics.empty()) {
    if (top_n > corpus.vocab.size())
      throw std::runtime_error("gibbs: --top-n exceeds the vocabulary size");
    std::vector<std::vector<std::string>> topics_words(topics);
    for (std::size_t t = 0; t < topics; ++t) {
      std::vector<std::uint32_t> order(corpus.vocab.size());
      for (std::size_t w = 0; w < order.size(); ++w)
        order[w] = static_cast<std::uint32_t>(w);
      const double* row = est.phi_hat.row_ptr(t);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::uint32_t a, std::uint32_t b) {
                         if (row[a] != row[b]) return row[a] > row[b];
                         return a < b;
                       });
      for (std::size_t r = 0; r < top_n; ++r)
        topics_words[t].push_back(corpus.vocab.id_to_word[order[r]]);
    }
    atomic_write_text(out_topics, render_topics(topics_words));
    manifest.outputs.push_back(out_topics);
    if (primary.empty()) primary = out_topics;
  }
  if (!out_clusters.empty()) {
    atomic_write_text(out_clusters, render_clusters(gibbs_clusters(est)));
    manifest.outputs.push_back(out_clusters);
    if (primary.empty()) primary = out_clusters;
  }
  if (primary.empty())
    throw std::runtime_error(
        "gibbs: need at least one of --out-theta, --out-topics, --out-clusters");
  manifest.config = {{"topics", topics},
                     {"sweeps", sweeps},
                     {"alpha", alpha},
                     {"beta", beta_prior},
                     {"top_n", top_n},
                     {"seed", seed}};
  manifest.finished_utc = RunManifest::now_utc();
  manifest.write(primary);
  return 0;
}

int cmd_infer(const std::string& checkpoint_path, const std::string& corpus_path,
              double tau_override, const std::string& out_theta,
              const std::string& out_clusters) {
  RunManifest manifest;
  manifest.command = "infer";
  manifest.started_utc = RunManifest::now_utc();
  manifest.add_input(checkpoint_path);
  manifest.add_input(corpus_path);
  Checkpoint ckpt = checkpoint_load(checkpoint_path);
  Vocabulary vocab;
  for (const std::string& w : ckpt.vocab) vocab.add(w);
  auto docs = read_token_docs(corpus_path);
  DocBatch all = docs_for_checkpoint(docs, vocab);
  const double tau =
      tau_override > 0.0
          ? tau_override
          : (ckpt.schedule.tau > 0.0 ? ckpt.schedule.tau : 1.0);
  // chunked so memory stays bounded; inference has no batch coupling
  DenseMatrix proportions(all.size(), ckpt.params.topic_count);
  std::vector<std::uint32_t> clusters(all.size());
  const std::size_t chunk = 1024;
  for (std::size_t start = 0; start < all.size(); start += chunk) {
    DocBatch part;
    const std::size_t end = std::min(start + chunk, all.size());
    part.docs.assign(all.docs.begin() + start, all.docs.begin() + end);
    InferResult r = infer_theta(ckpt.params, part, tau);
    for (std::size_t i = 0; i < part.size(); ++i) {
      clusters[start + i] = r.cluster[i];
      for (std::size_t t = 0; t < ckpt.params.topic_count; ++t)
        proportions(start + i, t) = r.proportions(i, t);
    }
  }
  std::string primary;
  if (!out_theta.empty()) {
    atomic_write_text(out_theta, render_theta(proportions));
    manifest.outputs.push_back(out_theta);
    primary = out_theta;
  }
  if (!out_clusters.empty()) {
    atomic_write_text(out_clusters, render_clusters(clusters));
    manifest.outputs.push_back(out_clusters);
    if (primary.empty()) primary = out_clusters;
  }
  if (primary.empty())
    throw std::runtime_error("infer: need --out-theta or --out-clusters");
  manifest.config = {{"tau", tau}};
  manifest.finished_utc = RunManifest::now_utc();
  manifest.write(primary);
  return 0;
}

int cmd_topics(const std::string& checkpoint_path, std::size_t top_n,
               const std::string& out) {
  RunManifest manifest;
  manifest.command = "topics";
  manifest.started_utc = RunManifest::now_utc();
  manifest.add_input(checkpoint_path);
  Checkpoint ckpt = checkpoint_load(checkpoint_path);
  Vocabulary vocab;
  for (const std::string& w : ckpt.vocab) vocab.add(w);
  auto topics = export_topics(ckpt.params, vocab, top_n);
  atomic_write_text(out, render_topics(topics));
  manifest.outputs.push_back(out);
  manifest.config = {{"top_n", top_n}};
  manifest.finished_utc = RunManifest::now_utc();
  manifest.write(out);
  return 0;
}

int cmd_eval(const std::string& metric, const std::string& clusters_path,
             const std::string& labels_path, const std::string& topics_path,
             const std::string& reference_path, std::size_t window,
             std::size_t top_n, const std::string& report_path) {
  RunManifest manifest;
  manifest.command = "eval";
  manifest.started_utc = RunManifest::now_utc();
  double value = 0.0;
  std::string report = "metric=" + metric + "\n";
  if (metric == "nmi" || metric == "purity") {
    if (clusters_path.empty() || labels_path.empty())
      throw std::runtime_error("eval: --metric " + metric +
                               " requires --clusters and --labels");
    manifest.add_input(clusters_path);
    manifest.add_input(labels_path);
    auto clusters = read_id_file(clusters_path);
    auto labels = read_label_ids(labels_path);
    value = metric == "nmi" ? nmi(clusters, labels) : purity(clusters, labels);
  } else if (metric == "npmi") {
    if (topics_path.empty() || reference_path.empty())
      throw std::runtime_error(
          "eval: --metric npmi requires --topics and --reference");
    manifest.add_input(topics_path);
    manifest.add_input(reference_path);
    auto topic_lines = read_token_docs(topics_path);
    if (topic_lines.empty())
      throw std::runtime_error("eval: topics file " + topics_path + " is empty");
    for (auto& words : topic_lines)
      if (words.size() > top_n) words.resize(top_n);
    auto reference = read_token_docs(reference_path);
    CoocStats stats = cooc_counts(reference, window);
    double sum = 0.0;
    for (std::size_t t = 0; t < topic_lines.size(); ++t) {
      const double s = npmi_topic(topic_lines[t], stats);
      report += "topic_" + std::to_string(t) + "=" + format_double(s) + "\n";
      sum += s;
    }
    value = sum / static_cast<double>(topic_lines.size());
  } else {
    throw std::runtime_error("eval: unknown metric '" + metric +
                             "' (expected nmi, purity or npmi)");
  }
  report += "value=" + format_double(value) + "\n";
  std::printf("%.6f\n", value);
  manifest.config = {{"metric", metric}, {"window", window}, {"top_n", top_n}};
  if (!report_path.empty()) {
    atomic_write_text(report_path, report);
    manifest.outputs.push_back(report_path);
    manifest.finished_utc = RunManifest::now_utc();
    manifest.write(report_path);
  }
  return 0;
}

int cmd_synth(const SynthConfig& cfg, const std::string& out_corpus,
              const std::string& out_labels, const std::string& out_embeddings) {
  RunManifest manifest;
  manifest.command = "synth";
  manifest.started_utc = RunManifest::now_utc();
  manifest.seed = cfg.seed;
  SynthData data = synth_corpus(cfg);
  atomic_write_text(out_corpus, render_token_docs(data.docs));
  std::string labels;
  for (std::int32_t l : data.labels) {
    labels += std::to_string(l);
    labels += '\n';
  }
  atomic_write_text(out_labels, labels);
  atomic_write_text(out_embeddings, render_embeddings(data.words, data.embeddings));
  manifest.outputs = {out_corpus, out_labels, out_embeddings};
  manifest.config = {{"topics", cfg.topics},
                     {"docs_per_topic", cfg.docs_per_topic},
                     {"doc_length", cfg.doc_length},
                     {"vocab_per_topic", cfg.vocab_per_topic},
                     {"embed_dim", cfg.embed_dim},
                     {"separation", cfg.separation},
                     {"seed", cfg.seed}};
  manifest.finished_utc = RunManifest::now_utc();
  manifest.write(out_corpus);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nested variational autoencoder topic modeling toolkit"};
  app.require_subcommand(1);
  app.failure_message([](const CLI::App*, const CLI::Error& e) {
    return std::string("error: ") + e.what() + "\n";
  });

  // prep
  auto* prep = app.add_subcommand("prep", "preprocess a raw corpus");
  std::string prep_input, prep_stop, prep_emb, prep_labels, prep_out,
      prep_out_labels, prep_out_index;
  std::size_t prep_min_count = 3;
  prep->add_option("--input", prep_input, "raw corpus, one document per line")
      ->required();
  prep->add_option("--stopwords", prep_stop, "stopword list, one per line");
  prep->add_option("--min-count", prep_min_count, "minimum corpus frequency");
  prep->add_option("--embeddings", prep_emb,
                   "embedding file; tokens without vectors are removed");
  prep->add_option("--labels", prep_labels, "label file aligned to the input");
  prep->add_option("--out", prep_out, "preprocessed corpus output")->required();
  prep->add_option("--out-labels", prep_out_labels, "filtered labels output");
  prep->add_option("--out-index", prep_out_index, "kept-line index output");

  // train
  auto* train_cmd = app.add_subcommand("train", "train the topic model");
  std::string train_corpus, train_emb, train_out, train_metrics,
      train_layers = "128,128";
  bool train_diag = false;
  TrainConfig train_config = shared_train_config(train_cmd, train_layers);
  train_cmd->add_option("--corpus", train_corpus, "preprocessed corpus")
      ->required();
  train_cmd->add_option("--embeddings", train_emb, "pretrained word vectors")
      ->required();
  train_cmd->add_option("--out", train_out, "checkpoint output")->required();
  train_cmd->add_option("--metrics", train_metrics,
                        "metrics log output (default: <out>.metrics.jsonl)");
  train_cmd->add_flag("--diagnostics", train_diag,
                      "record per-step gradient diagnostics in the log");

  // gibbs
  auto* gibbs_cmd = app.add_subcommand("gibbs", "collapsed Gibbs baseline");
  std::string gibbs_corpus, gibbs_theta, gibbs_topics, gibbs_clusters_out;
  std::size_t gibbs_topic_count = 0, gibbs_sweeps = 1500, gibbs_top_n = 15;
  double gibbs_alpha = 0.1, gibbs_beta = 0.01;
  std::uint64_t gibbs_seed = 1;
  gibbs_cmd->add_option("--corpus", gibbs_corpus, "preprocessed corpus")
      ->required();
  gibbs_cmd->add_option("--topics", gibbs_topic_count, "number of topics")
      ->required();
  gibbs_cmd->add_option("--sweeps", gibbs_sweeps, "full Gibbs sweeps");
  gibbs_cmd->add_option("--alpha", gibbs_alpha, "symmetric document prior");
  gibbs_cmd->add_option("--beta", gibbs_beta, "symmetric topic-word prior");
  gibbs_cmd->add_option("--seed", gibbs_seed, "random seed");
  gibbs_cmd->add_option("--top-n", gibbs_top_n, "words per topic line");
  gibbs_cmd->add_option("--out-theta", gibbs_theta, "document-topic output");
  gibbs_cmd->add_option("--out-topics", gibbs_topics, "top-words output");
  gibbs_cmd->add_option("--out-clusters", gibbs_clusters_out, "cluster output");

  // infer
  auto* infer_cmd =
      app.add_subcommand("infer", "document proportions from a checkpoint");
  std::string infer_ckpt, infer_corpus, infer_theta_out, infer_clusters_out;
  double infer_tau = 0.0;
  infer_cmd->add_option("--checkpoint", infer_ckpt, "trained checkpoint")
      ->required();
  infer_cmd->add_option("--corpus", infer_corpus, "preprocessed corpus")
      ->required();
  infer_cmd->add_option("--tau", infer_tau,
                        "override the checkpoint's final temperature");
  infer_cmd->add_option("--out-theta", infer_theta_out, "proportions output");
  infer_cmd->add_option("--out-clusters", infer_clusters_out,
                        "argmax cluster output");

  // topics
  auto* topics_cmd =
      app.add_subcommand("topics", "top words per topic from a checkpoint");
  std::string topics_ckpt, topics_out;
  std::size_t topics_top_n = 15;
  topics_cmd->add_option("--checkpoint", topics_ckpt, "trained checkpoint")
      ->required();
  topics_cmd->add_option("--top-n", topics_top_n, "words per topic");
  topics_cmd->add_option("--out", topics_out, "topics file output")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "clustering and coherence metrics");
  std::string eval_metric, eval_clusters, eval_labels, eval_topics,
      eval_reference, eval_report;
  std::size_t eval_window = 10, eval_top_n = 15;
  eval_cmd->add_option("--metric", eval_metric, "nmi, purity or npmi")
      ->required();
  eval_cmd->add_option("--clusters", eval_clusters, "cluster ids, one per line");
  eval_cmd->add_option("--labels", eval_labels, "ground-truth labels");
  eval_cmd->add_option("--topics", eval_topics, "topics file (npmi)");
  eval_cmd->add_option("--reference", eval_reference,
                       "reference corpus for co-occurrence (npmi)");
  eval_cmd->add_option("--window", eval_window, "sliding window size");
  eval_cmd->add_option("--top-n", eval_top_n, "top words per topic used");
  eval_cmd->add_option("--report", eval_report, "key=value report output");

  // diag
  auto* diag_cmd = app.add_subcommand(
      "diag", "training run with per-step gradient diagnostics");
  std::string diag_corpus, diag_emb, diag_out, diag_ckpt_out,
      diag_layers = "128,128", diag_bn_beta = "on", diag_bn_fc = "on";
  TrainConfig diag_config = shared_train_config(diag_cmd, diag_layers);
  diag_cmd->add_option("--corpus", diag_corpus, "preprocessed corpus")
      ->required();
  diag_cmd->add_option("--embeddings", diag_emb, "pretrained word vectors")
      ->required();
  diag_cmd->add_option("--bn-beta", diag_bn_beta,
                       "batch norm at the topic-word scores: on|off");
  diag_cmd->add_option("--bn-fc", diag_bn_fc,
                       "batch norm between dense layers: on|off");
  diag_cmd->add_option("--out", diag_out, "diagnostics log output")->required();
  diag_cmd->add_option("--out-checkpoint", diag_ckpt_out,
                       "optional checkpoint output");

  // synth
  auto* synth_cmd =
      app.add_subcommand("synth", "generate a planted-topic corpus");
  SynthConfig synth_cfg;
  std::string synth_corpus_out, synth_labels_out, synth_emb_out;
  synth_cmd->add_option("--topics", synth_cfg.topics, "planted topics");
  synth_cmd->add_option("--docs-per-topic", synth_cfg.docs_per_topic,
                        "documents per topic");
  synth_cmd->add_option("--doc-length", synth_cfg.doc_length, "tokens per doc");
  synth_cmd->add_option("--vocab-per-topic", synth_cfg.vocab_per_topic,
                        "words per topic vocabulary");
  synth_cmd->add_option("--embed-dim", synth_cfg.embed_dim,
                        "embedding dimension");
  synth_cmd->add_option("--separation", synth_cfg.separation,
                        "distance between embedding cluster centers");
  synth_cmd->add_option("--seed", synth_cfg.seed, "random seed");
  synth_cmd->add_option("--out-corpus", synth_corpus_out, "corpus output")
      ->required();
  synth_cmd->add_option("--out-labels", synth_labels_out, "labels output")
      ->required();
  synth_cmd->add_option("--out-embeddings", synth_emb_out, "embeddings output")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prep)
      return cmd_prep(prep_input, prep_stop, prep_min_count, prep_emb,
                      prep_labels, prep_out, prep_out_labels, prep_out_index);
    if (*train_cmd) {
      train_config.layer_sizes = parse_layers(train_layers);
      train_config.diagnostics = train_diag;
      if (!train_cmd->count("--burn-in-epochs"))
        train_config.burn_in_epochs = train_config.epochs / 2;
      if (train_metrics.empty()) train_metrics = train_out + ".metrics.jsonl";
      return run_training(train_config, train_corpus, train_emb, train_out,
                          train_metrics, "train");
    }
    if (*gibbs_cmd)
      return cmd_gibbs(gibbs_corpus, gibbs_topic_count, gibbs_sweeps,
                       gibbs_alpha, gibbs_beta, gibbs_seed, gibbs_top_n,
                       gibbs_theta, gibbs_topics, gibbs_clusters_out);
    if (*infer_cmd)
      return cmd_infer(infer_ckpt, infer_corpus, infer_tau, infer_theta_out,
                       infer_clusters_out);
    if (*topics_cmd) return cmd_topics(topics_ckpt, topics_top_n, topics_out);
    if (*eval_cmd)
      return cmd_eval(eval_metric, eval_clusters, eval_labels, eval_topics,
                      eval_reference, eval_window, eval_top_n, eval_report);
    if (*diag_cmd) {
      diag_config.layer_sizes = parse_layers(diag_layers);
      diag_config.diagnostics = true;
      if (!diag_cmd->count("--burn-in-epochs"))
        diag_config.burn_in_epochs = diag_config.epochs / 2;
      if (diag_bn_beta != "on" && diag_bn_beta != "off")
        throw std::runtime_error("diag: --bn-beta must be on or off");
      if (diag_bn_fc != "on" && diag_bn_fc != "off")
        throw std::runtime_error("diag: --bn-fc must be on or off");
      diag_config.bn_beta_enabled = diag_bn_beta == "on";
      diag_config.bn_fc_enabled = diag_bn_fc == "on";
      return run_training(diag_config, diag_corpus, diag_emb, diag_ckpt_out,
                          diag_out, "diag");
    }
    if (*synth_cmd)
      return cmd_synth(synth_cfg, synth_corpus_out, synth_labels_out,
                       synth_emb_out);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& c : msg)
      if (c == '\n') c = ' ';
    std::fprintf(stderr, "error: %s\n", msg.c_str());
    return 1;
  }
  return 1;
}
