// SPDX-License-Identifier: Apache-2.0
#include "charnmt/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>

#include "charnmt/error.hpp"
#include "charnmt/utf8.hpp"

namespace charnmt {

namespace {
const char* kReserved[4] = {"<unk>", "<pad>", "<bos>", "<eos>"};
}

Vocabulary::Vocabulary() {
  for (const char* s : kReserved) add(s);
}

int Vocabulary::add(const std::string& symbol) {
  auto it = index_.find(symbol);
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(symbols_.size());
  symbols_.push_back(symbol);
  index_.emplace(symbol, id);
  return id;
}

int Vocabulary::lookup(const std::string& symbol) const {
  auto it = index_.find(symbol);
  return it == index_.end() ? kUnk : it->second;
}

int Vocabulary::lookup(char32_t cp) const { return lookup(utf8_encode(cp)); }

bool Vocabulary::contains(const std::string& symbol) const {
  return index_.count(symbol) > 0;
}

const std::string& Vocabulary::symbol(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= symbols_.size())
    throw DataError("symbol id " + std::to_string(id) +
                    " outside vocabulary of size " +
                    std::to_string(symbols_.size()));
  return symbols_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode_chars(std::string_view line) const {
  std::vector<int> out;
  for (char32_t cp : utf8_decode(line)) out.push_back(lookup(cp));
  return out;
}

std::vector<int> Vocabulary::encode_tokens(
    const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(lookup(t));
  return out;
}

std::string Vocabulary::decode_to_text(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (id >= kUnk && id <= kEos) continue;
    out += symbol(id);
  }
  return out;
}

void Vocabulary::save(std::ostream& os) const {
  for (const auto& s : symbols_) {
    if (s.find('\n') != std::string::npos)
      throw DataError("vocabulary symbol contains a newline");
    os << s << '\n';
  }
}

void Vocabulary::save_file(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write vocabulary file: " + path);
  save(os);
}

Vocabulary Vocabulary::load(std::istream& is) {
  Vocabulary v;
  v.symbols_.clear();
  v.index_.clear();
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    v.add(line);
  }
  if (v.symbols_.size() < 4)
    throw DataError("vocabulary file lacks the four reserved symbols");
  for (int i = 0; i < 4; ++i)
    if (v.symbols_[static_cast<std::size_t>(i)] != kReserved[i])
      throw DataError("vocabulary file does not start with the reserved "
                      "symbols <unk> <pad> <bos> <eos>");
  return v;
}

Vocabulary Vocabulary::load_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read vocabulary file: " + path);
  return load(is);
}

Vocabulary Vocabulary::build_chars(const std::vector<std::string>& lines,
                                   std::size_t max_size) {
  // std::map keys give the deterministic code-point tie order.
  std::map<char32_t, std::size_t> counts;
  for (const auto& line : lines)
    for (char32_t cp : utf8_decode(line)) ++counts[cp];
  std::vector<std::pair<char32_t, std::size_t>> ranked(counts.begin(),
                                                       counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) {
                     return a.second > b.second;
                   });
  Vocabulary v;
  for (const auto& [cp, n] : ranked) {
    if (v.size() >= max_size) break;
    v.add(utf8_encode(cp));
  }
  return v;
}

Vocabulary Vocabulary::build_tokens(const std::vector<std::string>& lines,
                                    std::size_t max_size) {
  std::map<std::string, std::size_t> counts;
  for (const auto& line : lines)
    for (auto& tok : split_ws(line)) ++counts[tok];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(),
                                                          counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) {
                     return a.second > b.second;
                   });
  Vocabulary v;
  for (const auto& [tok, n] : ranked) {
    if (v.size() >= max_size) break;
    v.add(tok);
  }
  return v;
}

}  // namespace charnmt
