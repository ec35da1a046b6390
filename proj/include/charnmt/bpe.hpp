// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace charnmt {

// Sentinel appended to every word as its own symbol before merging and
// turned back into a space on detokenization.
inline constexpr const char* kEndOfWord = "</w>";

// Default merge-operation budgets for subword vocabularies. Multilingual
// models share one merge table across several source languages, so they get
// a larger budget than a single-pair model.
inline constexpr std::size_t kDefaultBpeOps = 20000;
inline constexpr std::size_t kMultilingualBpeOps = 50000;

// Ordered byte-pair merge operations.  Applying the merges in order is
// deterministic, and no merge refers to a symbol a later merge creates.
struct MergeTable {
  std::vector<std::pair<std::string, std::string>> merges;

  std::size_t size() const { return merges.size(); }

  void save(std::ostream& os) const;
  void save_file(const std::string& path) const;
  static MergeTable load(std::istream& is);
  static MergeTable load_file(const std::string& path);
};

// Learns up to `num_ops` merges over the whitespace-tokenized corpus:
// each word becomes its character sequence plus kEndOfWord, and the
// most frequent adjacent pair is merged repeatedly.  Stops early once
// no pair occurs twice.  Equal counts break toward the lexicographically
// smallest (left, right) pair.
MergeTable learn_bpe(const std::vector<std::string>& lines,
                     std::size_t num_ops);

// Splits one word (no whitespace) into subwords by replaying merges.
std::vector<std::string> apply_bpe_word(const std::string& word,
                                        const MergeTable& merges);

// Whitespace-tokenizes the sentence and replays the merges per word.
std::vector<std::string> apply_bpe(std::string_view sentence,
                                   const MergeTable& merges);

// Inverse of apply_bpe up to whitespace normalization: concatenates
// subwords and turns each end-of-word marker into a single space.
std::string bpe_detokenize(const std::vector<std::string>& tokens);

}  // namespace charnmt
