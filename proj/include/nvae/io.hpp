#pragma once

#include <charconv>
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nvae/matrix.hpp"
#include "nvae/trainer.hpp"

#include <json.hpp>

namespace nvae {

// All text outputs go through here: write to a temporary file, then rename,
// so failures never leave partial outputs behind.
inline void atomic_write_text(const std::string& path,
                              const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed on " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

// Shortest exact decimal form of a double.
inline std::string format_double(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

inline std::string render_theta(const DenseMatrix& theta) {
  std::string out;
  for (std::size_t i = 0; i < theta.rows; ++i) {
    for (std::size_t j = 0; j < theta.cols; ++j) {
      if (j) out += ' ';
      out += format_double(theta(i, j));
    }
    out += '\n';
  }
  return out;
}

inline std::string render_clusters(const std::vector<std::uint32_t>& clusters) {
  std::string out;
  for (std::uint32_t c : clusters) {
    out += std::to_string(c);
    out += '\n';
  }
  return out;
}

inline std::string render_topics(
    const std::vector<std::vector<std::string>>& topics) {
  std::string out;
  for (const auto& topic : topics) {
    for (std::size_t i = 0; i < topic.size(); ++i) {
      if (i) out += ' ';
      out += topic[i];
    }
    out += '\n';
  }
  return out;
}

inline std::string render_token_docs(
    const std::vector<std::vector<std::string>>& docs) {
  std::string out;
  for (const auto& doc : docs) {
    for (std::size_t i = 0; i < doc.size(); ++i) {
      if (i) out += ' ';
      out += doc[i];
    }
    out += '\n';
  }
  return out;
}

inline std::string render_embeddings(const std::vector<std::string>& words,
                                     const DenseMatrix& vectors) {
  if (words.size() != vectors.rows)
    throw std::invalid_argument("render_embeddings: size mismatch");
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    out += words[i];
    for (std::size_t j = 0; j < vectors.cols; ++j) {
      out += ' ';
      out += format_double(vectors(i, j));
    }
    out += '\n';
  }
  return out;
}

inline std::vector<std::int32_t> read_id_file(const std::string& path) {
  std::vector<std::int32_t> out;
  for (const std::string& line : read_lines(path)) {
    if (line.empty()) continue;
    std::int32_t v = 0;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc() || ptr != line.data() + line.size())
      throw std::runtime_error("bad id '" + line + "' in " + path);
    out.push_back(v);
  }
  return out;
}

// Label files carry one string per line; ids are assigned by first occurrence.
inline std::vector<std::int32_t> read_label_ids(const std::string& path) {
  std::vector<std::int32_t> out;
  std::unordered_map<std::string, std::int32_t> ids;
  std::vector<std::string> lines = read_lines(path);
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  for (const std::string& line : lines) {
    auto it = ids.find(line);
    if (it == ids.end())
      it = ids.emplace(line, static_cast<std::int32_t>(ids.size())).first;
    out.push_back(it->second);
  }
  return out;
}

// One JSON object per line: every epoch record, and every step record when
// diagnostics were enabled.
inline std::string render_metrics_log(const TrainResult& result) {
  std::string out;
  std::size_t next_step = 0;
  for (const EpochRecord& e : result.epochs) {
    while (next_step < result.steps.size() &&
           result.steps[next_step].epoch <= e.epoch) {
      const StepRecord& s = result.steps[next_step];
      nlohmann::json rec;
      rec["type"] = "step";
      rec["epoch"] = s.epoch;
      rec["step"] = s.step;
      rec["loss"] = s.loss;
      rec["beta_grad_norms"] = s.beta_grad_norms;
      rec["alpha"] = s.alpha;
      rec["fc_grad_norm"] = s.fc_grad_norm;
      out += rec.dump();
      out += '\n';
      ++next_step;
    }
    nlohmann::json rec;
    rec["type"] = "epoch";
    rec["epoch"] = e.epoch;
    rec["step"] = e.step;
    rec["loss"] = e.loss;
    rec["entropy_term"] = e.entropy_term;
    rec["kl_term"] = e.kl_term;
    rec["rec_term"] = e.rec_term;
    rec["eta_logtheta_term"] = e.eta_logtheta_term;
    rec["lr"] = e.lr;
    rec["tau"] = e.tau;
    rec["alpha"] = e.alpha;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, fnv1a64(bytes));
  return std::string("fnv1a64:") + buf;
}

}  // namespace nvae
