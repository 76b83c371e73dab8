#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nvae/model.hpp"
#include "nvae/optimizer.hpp"

namespace nvae {

// Self-describing binary container, little-endian throughout:
//   magic "NVAECKPT", u32 version (1)
//   u64 V, D, K; u32 hidden layer count; u64 sizes
//   u8 bn_fc, bn_beta, train_embeddings
//   f64 bn momentum, bn eps
//   schedule: u64 global_step, u64 steps_per_epoch, f64 lr, f64 tau
//   adam: u64 timestep
//   vocabulary: u64 count, then u32 length + bytes per word
//   named f64 blocks: every ModelParams array including BN running
//   statistics (tensor_refs(true) order), then adam_m.* / adam_v.* blocks
//   in tensor_refs(false) order
//   trailing magic "NVAEEND."
// Files are written to a temporary path and renamed, so a failed save never
// leaves a partial checkpoint behind.

namespace ckpt_detail {

constexpr char kMagic[8] = {'N', 'V', 'A', 'E', 'C', 'K', 'P', 'T'};
constexpr char kTail[8] = {'N', 'V', 'A', 'E', 'E', 'N', 'D', '.'};
constexpr std::uint32_t kVersion = 1;

inline void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(v));
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8))
    throw std::runtime_error("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline double get_f64(std::istream& is) {
  const std::uint64_t bits = get_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

inline void put_block(std::ostream& os, const std::string& name,
                      const DenseMatrix& m) {
  put_u32(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u64(os, m.rows);
  put_u64(os, m.cols);
  for (double v : m.data) put_f64(os, v);
}

inline DenseMatrix get_block(std::istream& is, const std::string& expected) {
  const std::uint32_t len = get_u32(is);
  if (len > 4096) throw std::runtime_error("checkpoint: corrupt block name");
  std::string name(len, '\0');
  if (!is.read(name.data(), len))
    throw std::runtime_error("checkpoint: truncated file");
  if (name != expected)
    throw std::runtime_error("checkpoint: expected block '" + expected +
                             "', found '" + name + "'");
  const std::uint64_t rows = get_u64(is);
  const std::uint64_t cols = get_u64(is);
  if (rows * cols > (1ull << 32))
    throw std::runtime_error("checkpoint: implausible block size");
  DenseMatrix m(rows, cols);
  for (double& v : m.data) v = get_f64(is);
  return m;
}

}  // namespace ckpt_detail

struct Checkpoint {
  ModelParams params;
  std::vector<std::string> vocab;
  ScheduleState schedule;
  AdamState adam;
};

inline void checkpoint_save(const std::string& path, ModelParams& params,
                            const std::vector<std::string>& vocab,
                            const ScheduleState& schedule,
                            const AdamState& adam) {
  namespace cd = ckpt_detail;
  if (vocab.size() != params.vocab_size)
    throw std::invalid_argument("checkpoint_save: vocabulary size mismatch");
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint_save: cannot open " + tmp);
    os.write(cd::kMagic, 8);
    cd::put_u32(os, cd::kVersion);
    cd::put_u64(os, params.vocab_size);
    cd::put_u64(os, params.embed_dim);
    cd::put_u64(os, params.topic_count);
    cd::put_u32(os, static_cast<std::uint32_t>(params.hidden_sizes.size()));
    for (std::size_t h : params.hidden_sizes) cd::put_u64(os, h);
    os.put(params.bn_fc_enabled ? 1 : 0);
    os.put(params.bn_beta_enabled ? 1 : 0);
    os.put(params.train_embeddings ? 1 : 0);
    const double momentum =
        params.hidden.empty() ? params.beta_bn.momentum : params.hidden[0].bn.momentum;
    const double eps =
        params.hidden.empty() ? 1e-5 : params.hidden[0].bn.eps;
    cd::put_f64(os, momentum);
    cd::put_f64(os, eps);
    cd::put_f64(os, params.beta_bn.momentum);
    cd::put_f64(os, params.beta_bn.eps);
    cd::put_u64(os, schedule.global_step);
    cd::put_u64(os, schedule.steps_per_epoch);
    cd::put_f64(os, schedule.lr);
    cd::put_f64(os, schedule.tau);
    cd::put_u64(os, adam.t);
    cd::put_u64(os, vocab.size());
    for (const std::string& w : vocab) {
      cd::put_u32(os, static_cast<std::uint32_t>(w.size()));
      os.write(w.data(), static_cast<std::streamsize>(w.size()));
    }
    for (const TensorRef& ref : params.tensor_refs(true))
      cd::put_block(os, ref.name, *ref.tensor);
    auto trainable = params.tensor_refs(false);
    if (adam.m.size() != trainable.size())
      throw std::invalid_argument("checkpoint_save: adam state misaligned");
    for (std::size_t i = 0; i < trainable.size(); ++i)
      cd::put_block(os, "adam_m." + trainable[i].name, adam.m[i]);
    for (std::size_t i = 0; i < trainable.size(); ++i)
      cd::put_block(os, "adam_v." + trainable[i].name, adam.v[i]);
    os.write(cd::kTail, 8);
    if (!os) throw std::runtime_error("checkpoint_save: write failed on " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

struct CheckpointExpect {
  std::optional<std::size_t> vocab_size;
  std::optional<std::size_t> embed_dim;
  std::optional<std::size_t> topic_count;
};

inline Checkpoint checkpoint_load(const std::string& path,
                                  const CheckpointExpect& expect = {}) {
  namespace cd = ckpt_detail;
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint_load: cannot open " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, cd::kMagic, 8) != 0)
    throw std::runtime_error("checkpoint_load: bad magic in " + path);
  const std::uint32_t version = cd::get_u32(is);
  if (version != cd::kVersion)
    throw std::runtime_error("checkpoint_load: unsupported version " +
                             std::to_string(version));
  Checkpoint out;
  ModelParams& p = out.params;
  p.vocab_size = cd::get_u64(is);
  p.embed_dim = cd::get_u64(is);
  p.topic_count = cd::get_u64(is);
  const std::uint32_t nh = cd::get_u32(is);
  if (nh > 64) throw std::runtime_error("checkpoint_load: corrupt layer count");
  for (std::uint32_t l = 0; l < nh; ++l)
    p.hidden_sizes.push_back(cd::get_u64(is));
  p.bn_fc_enabled = is.get() != 0;
  p.bn_beta_enabled = is.get() != 0;
  p.train_embeddings = is.get() != 0;
  const double momentum = cd::get_f64(is);
  const double eps = cd::get_f64(is);
  const double beta_momentum = cd::get_f64(is);
  const double beta_eps = cd::get_f64(is);
  out.schedule.global_step = cd::get_u64(is);
  out.schedule.steps_per_epoch = cd::get_u64(is);
  out.schedule.lr = cd::get_f64(is);
  out.schedule.tau = cd::get_f64(is);
  out.adam.t = cd::get_u64(is);
  const std::uint64_t vocab_count = cd::get_u64(is);
  if (vocab_count != p.vocab_size)
    throw std::runtime_error("checkpoint_load: vocabulary count mismatch");
  out.vocab.reserve(vocab_count);
  for (std::uint64_t i = 0; i < vocab_count; ++i) {
    const std::uint32_t len = cd::get_u32(is);
    if (len > 65536) throw std::runtime_error("checkpoint_load: corrupt word");
    std::string w(len, '\0');
    if (!is.read(w.data(), len))
      throw std::runtime_error("checkpoint: truncated file");
    out.vocab.push_back(std::move(w));
  }

  if (expect.vocab_size && *expect.vocab_size != p.vocab_size)
    throw std::runtime_error(
        "checkpoint_load: vocabulary dimension mismatch (file " +
        std::to_string(p.vocab_size) + ", expected " +
        std::to_string(*expect.vocab_size) + ")");
  if (expect.embed_dim && *expect.embed_dim != p.embed_dim)
    throw std::runtime_error("checkpoint_load: embedding dimension mismatch");
  if (expect.topic_count && *expect.topic_count != p.topic_count)
    throw std::runtime_error("checkpoint_load: topic dimension mismatch (file " +
                             std::to_string(p.topic_count) + ", expected " +
                             std::to_string(*expect.topic_count) + ")");

  // Allocate tensors, then load every named block in the documented order.
  p.omega = DenseMatrix(p.vocab_size, p.embed_dim);
  p.rho = DenseMatrix(p.topic_count, p.embed_dim);
  std::size_t in = p.embed_dim;
  for (std::size_t h : p.hidden_sizes) {
    ContextLayer layer;
    layer.weight = DenseMatrix(in, h);
    layer.bias = DenseMatrix(1, h);
    layer.bn = BatchNormState(h);
    layer.bn.momentum = momentum;
    layer.bn.eps = eps;
    p.hidden.push_back(std::move(layer));
    in = h;
  }
  p.out_weight = DenseMatrix(in, p.topic_count);
  p.out_bias = DenseMatrix(1, p.topic_count);
  p.eta_scale = DenseMatrix(1, 1);
  p.eta_shift = DenseMatrix(1, 1);
  p.beta_tilde = DenseMatrix(p.topic_count, p.vocab_size);
  p.beta_bn = BatchNormState(p.topic_count);
  p.beta_bn.momentum = beta_momentum;
  p.beta_bn.eps = beta_eps;
  p.alpha_hat = DenseMatrix(1, p.topic_count);

  for (const TensorRef& ref : p.tensor_refs(true)) {
    DenseMatrix loaded = cd::get_block(is, ref.name);
    if (!loaded.same_shape(*ref.tensor))
      throw std::runtime_error("checkpoint_load: block '" + ref.name +
                               "' has shape " + shape_str(loaded) +
                               ", expected " + shape_str(*ref.tensor));
    *ref.tensor = std::move(loaded);
  }
  auto trainable = p.tensor_refs(false);
  for (std::size_t i = 0; i < trainable.size(); ++i)
    out.adam.m.push_back(cd::get_block(is, "adam_m." + trainable[i].name));
  for (std::size_t i = 0; i < trainable.size(); ++i)
    out.adam.v.push_back(cd::get_block(is, "adam_v." + trainable[i].name));
  for (std::size_t i = 0; i < trainable.size(); ++i)
    if (!out.adam.m[i].same_shape(*trainable[i].tensor) ||
        !out.adam.v[i].same_shape(*trainable[i].tensor))
      throw std::runtime_error("checkpoint_load: adam block shape mismatch");
  char tail[8];
  if (!is.read(tail, 8) || std::memcmp(tail, cd::kTail, 8) != 0)
    throw std::runtime_error("checkpoint_load: missing end marker in " + path);
  is.peek();
  if (!is.eof())
    throw std::runtime_error("checkpoint_load: trailing bytes in " + path);
  return out;
}

}  // namespace nvae
