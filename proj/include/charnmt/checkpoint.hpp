// SPDX-License-Identifier: Apache-2.0
#pragma once

// Self-describing model container: an 8-byte magic tag, the model
// configuration and both vocabularies as embedded text blocks, then
// every parameter as (canonical name, shape, little-endian float32
// payload).  Integers are u64 little-endian.  Round-trips bit-exactly
// for float models.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "charnmt/config.hpp"
#include "charnmt/error.hpp"
#include "charnmt/model.hpp"
#include "charnmt/vocab.hpp"

namespace charnmt {

namespace ckpt_detail {

inline constexpr char kMagic[8] = {'C', 'H', 'A', 'R', 'N', 'M', 'T', '1'};

inline void write_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 8);
}

inline std::uint64_t read_u64(std::istream& is) {
  char b[8];
  is.read(b, 8);
  if (!is) throw DataError("checkpoint truncated while reading an integer");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i]))
         << (8 * i);
  return v;
}

inline void write_block(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_block(std::istream& is) {
  const std::uint64_t n = read_u64(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw DataError("checkpoint truncated while reading a block");
  return s;
}

inline void write_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  char b[4];
  for (int i = 0; i < 4; ++i)
    b[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  os.write(b, 4);
}

inline float read_f32(std::istream& is) {
  char b[4];
  is.read(b, 4);
  if (!is) throw DataError("checkpoint truncated while reading parameters");
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i)
    bits |= std::uint32_t(static_cast<unsigned char>(b[i])) << (8 * i);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace ckpt_detail

template <typename T>
void save_checkpoint(std::ostream& os, const Model<T>& model,
                     const Vocabulary& src_vocab, const Vocabulary& tgt_vocab) {
  using namespace ckpt_detail;
  os.write(kMagic, 8);
  {
    std::ostringstream cfg;
    model.config().save(cfg);
    write_block(os, cfg.str());
  }
  {
    std::ostringstream sv;
    src_vocab.save(sv);
    write_block(os, sv.str());
  }
  {
    std::ostringstream tv;
    tgt_vocab.save(tv);
    write_block(os, tv.str());
  }
  const ParamSet<T>& params = model.params();
  write_u64(os, params.size());
  for (const auto& item : params) {
    write_block(os, item.name);
    const Shape& shape = item.tensor.shape();
    write_u64(os, shape.size());
    for (std::size_t d : shape) write_u64(os, d);
    for (const T v : item.tensor.values())
      write_f32(os, static_cast<float>(v));
  }
}

template <typename T>
void save_checkpoint_file(const std::string& path, const Model<T>& model,
                          const Vocabulary& src_vocab,
                          const Vocabulary& tgt_vocab) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint: " + path);
  save_checkpoint(os, model, src_vocab, tgt_vocab);
  if (!os) throw DataError("failed writing checkpoint: " + path);
}

template <typename T>
struct LoadedModel {
  Model<T> model;
  Vocabulary src_vocab;
  Vocabulary tgt_vocab;
};

template <typename T>
LoadedModel<T> load_checkpoint(std::istream& is) {
  using namespace ckpt_detail;
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("not a model checkpoint (bad magic)");

  std::istringstream cfg_text(read_block(is));
  ModelConfig config = ModelConfig::load(cfg_text);
  std::istringstream sv_text(read_block(is));
  Vocabulary src_vocab = Vocabulary::load(sv_text);
  std::istringstream tv_text(read_block(is));
  Vocabulary tgt_vocab = Vocabulary::load(tv_text);

  if (src_vocab.size() != config.source_vocab_size)
    throw DataError("checkpoint source vocabulary has " +
                    std::to_string(src_vocab.size()) +
                    " symbols but config declares " +
                    std::to_string(config.source_vocab_size));
  if (tgt_vocab.size() != config.target_vocab_size)
    throw DataError("checkpoint target vocabulary has " +
                    std::to_string(tgt_vocab.size()) +
                    " symbols but config declares " +
                    std::to_string(config.target_vocab_size));

  LoadedModel<T> out{Model<T>(config), std::move(src_vocab),
                     std::move(tgt_vocab)};
  const std::uint64_t n_params = read_u64(is);
  if (n_params != out.model.params().size())
    throw DataError("checkpoint holds " + std::to_string(n_params) +
                    " parameters, model expects " +
                    std::to_string(out.model.params().size()));
  for (std::uint64_t p = 0; p < n_params; ++p) {
    const std::string name = read_block(is);
    Shape shape(read_u64(is));
    for (std::size_t& d : shape) d = read_u64(is);
    Tensor<T>* target = out.model.parameter(name);
    if (!target)
      throw DataError("checkpoint parameter '" + name +
                      "' does not exist in the model");
    if (target->shape() != shape)
      throw DataError("checkpoint parameter '" + name + "' has shape " +
                      shape_str(shape) + " but the model expects " +
                      shape_str(target->shape()));
    for (T& v : target->values()) v = static_cast<T>(read_f32(is));
  }
  return out;
}

template <typename T>
LoadedModel<T> load_checkpoint_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read checkpoint: " + path);
  try {
    return load_checkpoint<T>(is);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace charnmt
