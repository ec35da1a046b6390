// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace charnmt {

enum class SourceKind { kChar, kSubword };

std::string to_string(SourceKind k);
SourceKind source_kind_from_string(const std::string& s);

// Architecture hyperparameters.  An empty filter bank selects the
// plain recurrent encoder over source embeddings (the subword baseline
// path); pool_stride must then be 1.
struct ModelConfig {
  SourceKind source_kind = SourceKind::kChar;
  std::size_t source_vocab_size = 300;
  std::size_t source_emb_dim = 128;
  std::size_t target_vocab_size = 300;
  std::size_t target_emb_dim = 512;
  // filter_counts[i] filters of width filter_widths[i]; widths must be
  // exactly 1..m when nonempty.
  std::vector<std::size_t> filter_widths;
  std::vector<std::size_t> filter_counts;
  std::size_t pool_stride = 5;
  std::size_t highway_layers = 4;
  std::size_t encoder_hidden = 512;
  std::size_t decoder_hidden = 1024;
  std::size_t attention_hidden = 512;
  std::size_t output_hidden = 512;
  // Sources longer than this (code points for char, tokens for
  // subword) are dropped by corpus filtering.
  std::size_t max_source_length = 450;

  // Total filter count N (rows of the convolution output); the
  // segment embedding width going into the highway stack.
  std::size_t total_filters() const;
  // Width of the vector the encoder GRUs consume per position.
  std::size_t segment_input_dim() const {
    return filter_widths.empty() ? source_emb_dim : total_filters();
  }

  void validate() const;

  void save(std::ostream& os) const;
  void save_file(const std::string& path) const;
  static ModelConfig load(std::istream& is);
  static ModelConfig load_file(const std::string& path);
};

// Named presets: "bilingual-char", "multilingual-char", "bpe2char",
// "tiny".  Throws DataError for unknown names.
ModelConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

// Optimization settings.
struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t minibatch_size = 64;
  double clip_threshold = 1.0;
  double init_range = 0.01;
  std::size_t patience = 5;
  std::size_t eval_every = 500;
  // Hard ceiling on updates; stopping by patience usually fires first.
  std::size_t max_updates = 5000;
  std::size_t val_beam = 20;
  std::uint64_t seed = 1;

  void validate() const;
};

}  // namespace charnmt
