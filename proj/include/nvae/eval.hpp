#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace nvae {

// (1/N) sum over clusters of the majority label count.
inline double purity(const std::vector<std::int32_t>& clusters,
                     const std::vector<std::int32_t>& labels) {
  if (clusters.empty() || clusters.size() != labels.size())
    throw std::invalid_argument("purity: cluster/label lengths differ or empty");
  std::map<std::int32_t, std::map<std::int32_t, std::size_t>> table;
  for (std::size_t i = 0; i < clusters.size(); ++i)
    ++table[clusters[i]][labels[i]];
  double correct = 0.0;
  for (const auto& [cluster, counts] : table) {
    std::size_t best = 0;
    for (const auto& [label, n] : counts) best = std::max(best, n);
    correct += static_cast<double>(best);
  }
  return correct / static_cast<double>(clusters.size());
}

// Normalized mutual information with the arithmetic-mean normalization,
// natural logarithms. Identical partitions score 1 (including two trivial
// single-cluster partitions); if only one side is trivial the score is 0.
inline double nmi(const std::vector<std::int32_t>& clusters,
                  const std::vector<std::int32_t>& labels) {
  if (clusters.empty() || clusters.size() != labels.size())
    throw std::invalid_argument("nmi: cluster/label lengths differ or empty");
  const double n = static_cast<double>(clusters.size());
  std::map<std::int32_t, std::size_t> cn, ln;
  std::map<std::pair<std::int32_t, std::int32_t>, std::size_t> joint;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    ++cn[clusters[i]];
    ++ln[labels[i]];
    ++joint[{clusters[i], labels[i]}];
  }
  double hc = 0.0, hl = 0.0;
  for (const auto& [c, cnt] : cn) {
    const double p = cnt / n;
    hc -= p * std::log(p);
  }
  for (const auto& [l, cnt] : ln) {
    const double p = cnt / n;
    hl -= p * std::log(p);
  }
  if (hc <= 0.0 && hl <= 0.0) return 1.0;  // both trivial, hence identical
  if (hc <= 0.0 || hl <= 0.0) return 0.0;
  double mi = 0.0;
  for (const auto& [pair, cnt] : joint) {
    const double pxy = cnt / n;
    const double px = cn[pair.first] / n;
    const double py = ln[pair.second] / n;
    mi += pxy * std::log(pxy / (px * py));
  }
  return mi / (0.5 * (hc + hl));
}

// Sliding-window co-occurrence counts. A word or pair counts at most once
// per window; windows never cross document boundaries, and a document
// shorter than the window forms a single window.
struct CoocStats {
  std::uint64_t window_count = 0;
  std::unordered_map<std::string, std::uint64_t> single;
  std::unordered_map<std::string, std::uint64_t> pair;  // key: "a\x1fb", a < b

  static std::string pair_key(const std::string& a, const std::string& b) {
    return a < b ? a + '\x1f' + b : b + '\x1f' + a;
  }

  std::uint64_t pair_count(const std::string& a, const std::string& b) const {
    auto it = pair.find(pair_key(a, b));
    return it == pair.end() ? 0 : it->second;
  }

  std::uint64_t single_count(const std::string& w) const {
    auto it = single.find(w);
    return it == single.end() ? 0 : it->second;
  }
};

inline CoocStats cooc_counts(const std::vector<std::vector<std::string>>& docs,
                             std::size_t window) {
  if (window < 2) throw std::invalid_argument("cooc_counts: window below 2");
  if (docs.empty()) throw std::invalid_argument("cooc_counts: empty reference corpus");
  CoocStats stats;
  std::unordered_map<std::string, bool> in_window;
  for (const auto& doc : docs) {
    if (doc.empty()) continue;
    const std::size_t n_windows =
        doc.size() <= window ? 1 : doc.size() - window + 1;
    for (std::size_t start = 0; start < n_windows; ++start) {
      const std::size_t end = std::min(start + window, doc.size());
      ++stats.window_count;
      in_window.clear();
      for (std::size_t i = start; i < end; ++i) in_window[doc[i]] = true;
      std::vector<const std::string*> uniq;
      uniq.reserve(in_window.size());
      for (const auto& [w, _] : in_window) {
        ++stats.single[w];
        uniq.push_back(&w);
      }
      for (std::size_t i = 0; i < uniq.size(); ++i)
        for (std::size_t j = i + 1; j < uniq.size(); ++j)
          ++stats.pair[CoocStats::pair_key(*uniq[i], *uniq[j])];
    }
  }
  if (stats.window_count == 0)
    throw std::invalid_argument("cooc_counts: empty reference corpus");
  return stats;
}

// Mean pairwise normalized PMI over the distinct top words of one topic.
// Probabilities are window fractions; a pair that never co-occurs scores -1
// and a pair with joint probability 1 scores +1. Words absent from the
// reference statistics are skipped; fewer than two usable words is an error.
inline double npmi_topic(const std::vector<std::string>& top_words,
                         const CoocStats& stats) {
  std::vector<std::string> present;
  for (const std::string& w : top_words) {
    if (stats.single_count(w) == 0) continue;
    bool dup = false;
    for (const std::string& p : present) dup = dup || p == w;
    if (!dup) present.push_back(w);
  }
  if (present.size() < 2)
    throw std::invalid_argument(
        "npmi_topic: fewer than two top words have reference statistics");
  const double n = static_cast<double>(stats.window_count);
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < present.size(); ++i) {
    for (std::size_t j = i + 1; j < present.size(); ++j) {
      ++pairs;
      const std::uint64_t joint = stats.pair_count(present[i], present[j]);
      if (joint == 0) {
        sum += -1.0;
        continue;
      }
      const double pij = joint / n;
      if (pij >= 1.0) {
        sum += 1.0;
        continue;
      }
      const double pi = stats.single_count(present[i]) / n;
      const double pj = stats.single_count(present[j]) / n;
      sum += std::log(pij / (pi * pj)) / (-std::log(pij));
    }
  }
  return sum / static_cast<double>(pairs);
}

// Model-level coherence: mean of the per-topic scores.
inline double npmi_model(const std::vector<std::vector<std::string>>& topics,
                         const CoocStats& stats) {
  if (topics.empty()) throw std::invalid_argument("npmi_model: no topics");
  double sum = 0.0;
  for (const auto& topic : topics) sum += npmi_topic(topic, stats);
  return sum / static_cast<double>(topics.size());
}

}  // namespace nvae
