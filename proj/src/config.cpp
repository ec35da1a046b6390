// SPDX-License-Identifier: Apache-2.0
#include "charnmt/config.hpp"

#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "charnmt/error.hpp"

namespace charnmt {

std::string to_string(SourceKind k) {
  return k == SourceKind::kChar ? "char" : "subword";
}

SourceKind source_kind_from_string(const std::string& s) {
  if (s == "char") return SourceKind::kChar;
  if (s == "subword") return SourceKind::kSubword;
  throw DataError("unknown source kind: '" + s + "'");
}

std::size_t ModelConfig::total_filters() const {
  std::size_t n = 0;
  for (std::size_t c : filter_counts) n += c;
  return n;
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw DataError(std::string(name) + " must be positive");
  };
  positive(source_vocab_size, "source_vocab_size");
  positive(source_emb_dim, "source_emb_dim");
  positive(target_vocab_size, "target_vocab_size");
  positive(target_emb_dim, "target_emb_dim");
  positive(pool_stride, "pool_stride");
  positive(encoder_hidden, "encoder_hidden");
  positive(decoder_hidden, "decoder_hidden");
  positive(attention_hidden, "attention_hidden");
  positive(output_hidden, "output_hidden");
  positive(max_source_length, "max_source_length");
  if (source_vocab_size < 5 || target_vocab_size < 5)
    throw DataError("vocabulary sizes must exceed the four reserved symbols");
  if (filter_widths.size() != filter_counts.size())
    throw DataError("filter width and count lists differ in length");
  for (std::size_t i = 0; i < filter_widths.size(); ++i) {
    if (filter_widths[i] != i + 1)
      throw DataError("filter widths must be exactly 1..m in order");
    positive(filter_counts[i], "filter count");
  }
  if (filter_widths.empty() && pool_stride != 1)
    throw DataError("pool_stride must be 1 when the filter bank is empty");
  if (filter_widths.empty() && highway_layers != 0)
    throw DataError("highway_layers must be 0 when the filter bank is empty");
}

namespace {

std::string filters_to_string(const ModelConfig& c) {
  std::ostringstream os;
  for (std::size_t i = 0; i < c.filter_widths.size(); ++i) {
    if (i) os << ',';
    os << c.filter_widths[i] << ':' << c.filter_counts[i];
  }
  return os.str();
}

void parse_filters(const std::string& text, ModelConfig& c) {
  c.filter_widths.clear();
  c.filter_counts.clear();
  if (text.empty()) return;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    const std::size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw DataError("malformed filter spec: '" + item + "'");
    c.filter_widths.push_back(std::stoul(item.substr(0, colon)));
    c.filter_counts.push_back(std::stoul(item.substr(colon + 1)));
  }
}

}  // namespace

void ModelConfig::save(std::ostream& os) const {
  os << "source_kind = " << to_string(source_kind) << '\n'
     << "source_vocab_size = " << source_vocab_size << '\n'
     << "source_emb_dim = " << source_emb_dim << '\n'
     << "target_vocab_size = " << target_vocab_size << '\n'
     << "target_emb_dim = " << target_emb_dim << '\n'
     << "filters = " << filters_to_string(*this) << '\n'
     << "pool_stride = " << pool_stride << '\n'
     << "highway_layers = " << highway_layers << '\n'
     << "encoder_hidden = " << encoder_hidden << '\n'
     << "decoder_hidden = " << decoder_hidden << '\n'
     << "attention_hidden = " << attention_hidden << '\n'
     << "output_hidden = " << output_hidden << '\n'
     << "max_source_length = " << max_source_length << '\n';
}

void ModelConfig::save_file(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write config file: " + path);
  save(os);
}

ModelConfig ModelConfig::load(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string stripped;
    for (char ch : line)
      if (!std::isspace(static_cast<unsigned char>(ch))) stripped += ch;
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw DataError("config line " + std::to_string(lineno) +
                      " is not key = value: '" + line + "'");
    kv[stripped.substr(0, eq)] = stripped.substr(eq + 1);
  }

  ModelConfig c;
  auto take = [&kv](const char* key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end())
      throw DataError(std::string("config is missing key '") + key + "'");
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto take_size = [&take](const char* key) {
    return static_cast<std::size_t>(std::stoull(take(key)));
  };
  c.source_kind = source_kind_from_string(take("source_kind"));
  c.source_vocab_size = take_size("source_vocab_size");
  c.source_emb_dim = take_size("source_emb_dim");
  c.target_vocab_size = take_size("target_vocab_size");
  c.target_emb_dim = take_size("target_emb_dim");
  parse_filters(take("filters"), c);
  c.pool_stride = take_size("pool_stride");
  c.highway_layers = take_size("highway_layers");
  c.encoder_hidden = take_size("encoder_hidden");
  c.decoder_hidden = take_size("decoder_hidden");
  c.attention_hidden = take_size("attention_hidden");
  c.output_hidden = take_size("output_hidden");
  c.max_source_length = take_size("max_source_length");
  if (!kv.empty())
    throw DataError("config has unknown key '" + kv.begin()->first + "'");
  c.validate();
  return c;
}

ModelConfig ModelConfig::load_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read config file: " + path);
  try {
    return load(is);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

ModelConfig preset_config(const std::string& name) {
  ModelConfig c;
  if (name == "bilingual-char") {
    c.source_kind = SourceKind::kChar;
    c.source_vocab_size = 300;
    c.source_emb_dim = 128;
    c.target_vocab_size = 300;
    c.target_emb_dim = 512;
    c.filter_widths = {1, 2, 3, 4, 5, 6, 7, 8};
    c.filter_counts = {200, 200, 250, 250, 300, 300, 300, 300};
    c.pool_stride = 5;
    c.highway_layers = 4;
    c.encoder_hidden = 512;
    c.decoder_hidden = 1024;
    c.attention_hidden = 512;
    c.output_hidden = 512;
    c.max_source_length = 450;
  } else if (name == "multilingual-char") {
    c.source_kind = SourceKind::kChar;
    c.source_vocab_size = 400;
    c.source_emb_dim = 128;
    c.target_vocab_size = 400;
    c.target_emb_dim = 512;
    c.filter_widths = {1, 2, 3, 4, 5, 6, 7, 8};
    c.filter_counts = {200, 250, 300, 300, 400, 400, 400, 400};
    c.pool_stride = 5;
    c.highway_layers = 4;
    c.encoder_hidden = 512;
    c.decoder_hidden = 1024;
    c.attention_hidden = 512;
    c.output_hidden = 512;
    c.max_source_length = 450;
  } else if (name == "bpe2char") {
    c.source_kind = SourceKind::kSubword;
    c.source_vocab_size = 24440;
    c.source_emb_dim = 512;
    c.target_vocab_size = 300;
    c.target_emb_dim = 512;
    c.filter_widths = {};
    c.filter_counts = {};
    c.pool_stride = 1;
    c.highway_layers = 0;
    c.encoder_hidden = 512;
    c.decoder_hidden = 1024;
    c.attention_hidden = 512;
    c.output_hidden = 512;
    c.max_source_length = 50;
  } else if (name == "tiny") {
    c.source_kind = SourceKind::kChar;
    c.source_vocab_size = 12;
    c.source_emb_dim = 4;
    c.target_vocab_size = 12;
    c.target_emb_dim = 6;
    c.filter_widths = {1, 2};
    c.filter_counts = {3, 3};
    c.pool_stride = 2;
    c.highway_layers = 1;
    c.encoder_hidden = 5;
    c.decoder_hidden = 7;
    c.attention_hidden = 6;
    c.output_hidden = 6;
    c.max_source_length = 450;
  } else {
    throw DataError("unknown preset '" + name + "'; expected one of: " +
                    [] {
                      std::string all;
                      for (const auto& n : preset_names()) {
                        if (!all.empty()) all += ", ";
                        all += n;
                      }
                      return all;
                    }());
  }
  c.validate();
  return c;
}

std::vector<std::string> preset_names() {
  return {"bilingual-char", "multilingual-char", "bpe2char", "tiny"};
}

void TrainConfig::validate() const {
  if (learning_rate <= 0) throw DataError("learning_rate must be positive");
  if (minibatch_size == 0) throw DataError("minibatch_size must be positive");
  if (clip_threshold <= 0) throw DataError("clip_threshold must be positive");
  if (init_range <= 0) throw DataError("init_range must be positive");
  if (eval_every == 0) throw DataError("eval_every must be positive");
  if (max_updates == 0) throw DataError("max_updates must be positive");
  if (val_beam == 0) throw DataError("val_beam must be positive");
}

}  // namespace charnmt
