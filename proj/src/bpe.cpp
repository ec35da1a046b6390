// SPDX-License-Identifier: Apache-2.0
#include "charnmt/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include "charnmt/error.hpp"
#include "charnmt/utf8.hpp"

namespace charnmt {

namespace {

constexpr const char* kMergesHeader = "charnmt merges v1";

using SymbolPair = std::pair<std::string, std::string>;

std::vector<std::string> word_to_symbols(const std::string& word) {
  std::vector<std::string> syms;
  for (char32_t cp : utf8_decode(word)) syms.push_back(utf8_encode(cp));
  syms.push_back(kEndOfWord);
  return syms;
}

// Adds every adjacent pair of `syms`, weighted by `count`, into `into`.
void count_pairs(const std::vector<std::string>& syms, long count,
                 std::map<SymbolPair, long>& into) {
  for (std::size_t i = 0; i + 1 < syms.size(); ++i)
    into[{syms[i], syms[i + 1]}] += count;
}

}  // namespace

MergeTable learn_bpe(const std::vector<std::string>& lines,
                     std::size_t num_ops) {
  // Unique words with frequencies; symbol sequences evolve as merges land.
  std::vector<std::vector<std::string>> words;
  std::vector<long> freq;
  {
    std::unordered_map<std::string, std::size_t> seen;
    for (const auto& line : lines)
      for (auto& w : split_ws(line)) {
        auto it = seen.find(w);
        if (it == seen.end()) {
          seen.emplace(w, words.size());
          words.push_back(word_to_symbols(w));
          freq.push_back(1);
        } else {
          ++freq[it->second];
        }
      }
  }

  // Global pair counts plus, per pair, the set of words containing it,
  // kept incrementally so each merge touches only the affected words.
  // (The test suite checks this against a full recount oracle.)
  std::map<SymbolPair, long> pair_counts;
  std::map<SymbolPair, std::unordered_set<std::size_t>> pair_words;
  for (std::size_t w = 0; w < words.size(); ++w)
    for (std::size_t i = 0; i + 1 < words[w].size(); ++i) {
      const SymbolPair p{words[w][i], words[w][i + 1]};
      pair_counts[p] += freq[w];
      pair_words[p].insert(w);
    }

  MergeTable table;
  for (std::size_t op = 0; op < num_ops; ++op) {
    // Ordered map iteration makes the equal-count winner the
    // lexicographically smallest pair.
    const SymbolPair* best = nullptr;
    long best_count = 0;
    for (const auto& [p, c] : pair_counts)
      if (c > best_count) {
        best_count = c;
        best = &p;
      }
    if (!best || best_count < 2) break;

    const SymbolPair merged_pair = *best;
    const std::string joined = merged_pair.first + merged_pair.second;
    table.merges.push_back(merged_pair);

    const auto affected = pair_words[merged_pair];
    for (std::size_t w : affected) {
      std::vector<std::string>& syms = words[w];
      std::map<SymbolPair, long> before;
      count_pairs(syms, freq[w], before);

      std::vector<std::string> next;
      next.reserve(syms.size());
      std::size_t i = 0;
      while (i < syms.size()) {
        if (i + 1 < syms.size() && syms[i] == merged_pair.first &&
            syms[i + 1] == merged_pair.second) {
          next.push_back(joined);
          i += 2;
        } else {
          next.push_back(syms[i]);
          ++i;
        }
      }
      syms = std::move(next);

      std::map<SymbolPair, long> after;
      count_pairs(syms, freq[w], after);

      for (const auto& [p, c] : before) {
        auto it = pair_counts.find(p);
        it->second -= c;
        if (it->second <= 0) pair_counts.erase(it);
        auto delta = after.find(p);
        if (delta == after.end()) pair_words[p].erase(w);
      }
      for (const auto& [p, c] : after) {
        pair_counts[p] += c;
        pair_words[p].insert(w);
      }
    }
    pair_counts.erase(merged_pair);
    pair_words.erase(merged_pair);
  }
  return table;
}

std::vector<std::string> apply_bpe_word(const std::string& word,
                                        const MergeTable& merges) {
  std::vector<std::string> syms = word_to_symbols(word);
  for (const auto& [left, right] : merges.merges) {
    if (syms.size() < 2) break;
    std::vector<std::string> next;
    next.reserve(syms.size());
    std::size_t i = 0;
    bool changed = false;
    while (i < syms.size()) {
      if (i + 1 < syms.size() && syms[i] == left && syms[i + 1] == right) {
        next.push_back(left + right);
        i += 2;
        changed = true;
      } else {
        next.push_back(syms[i]);
        ++i;
      }
    }
    if (changed) syms = std::move(next);
  }
  return syms;
}

std::vector<std::string> apply_bpe(std::string_view sentence,
                                   const MergeTable& merges) {
  std::vector<std::string> out;
  for (const auto& word : split_ws(sentence))
    for (auto& tok : apply_bpe_word(word, merges)) out.push_back(std::move(tok));
  return out;
}

std::string bpe_detokenize(const std::vector<std::string>& tokens) {
  std::string joined;
  for (const auto& t : tokens) joined += t;
  std::string out;
  const std::string marker = kEndOfWord;
  std::size_t i = 0;
  while (i < joined.size()) {
    if (joined.compare(i, marker.size(), marker) == 0) {
      out.push_back(' ');
      i += marker.size();
    } else {
      out.push_back(joined[i]);
      ++i;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

void MergeTable::save(std::ostream& os) const {
  os << kMergesHeader << '\n';
  for (const auto& [l, r] : merges) os << l << ' ' << r << '\n';
}

void MergeTable::save_file(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write merge table: " + path);
  save(os);
}

MergeTable MergeTable::load(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("empty merge table file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMergesHeader)
    throw DataError("merge table has unknown header: '" + line + "'");
  MergeTable t;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t sp = line.find(' ');
    if (sp == std::string::npos || sp == 0 || sp + 1 >= line.size())
      throw DataError("malformed merge line: '" + line + "'");
    t.merges.emplace_back(line.substr(0, sp), line.substr(sp + 1));
  }
  return t;
}

MergeTable MergeTable::load_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read merge table: " + path);
  return MergeTable::load(is);
}

}  // namespace charnmt
