// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace charnmt {

// Symbol table shared by character- and subword-level models.  Ids
// 0..3 are reserved control symbols; real symbols follow in frequency
// order.  Unknown input encodes to kUnk rather than failing, since
// test-time text routinely contains unseen characters.
class Vocabulary {
public:
  static constexpr int kUnk = 0;
  static constexpr int kPad = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;

  Vocabulary();

  // Returns the id of `symbol`, inserting it if new.
  int add(const std::string& symbol);

  // Id of `symbol`, or kUnk when absent.
  int lookup(const std::string& symbol) const;
  int lookup(char32_t cp) const;
  bool contains(const std::string& symbol) const;

  const std::string& symbol(int id) const;
  std::size_t size() const { return symbols_.size(); }

  // One id per code point.
  std::vector<int> encode_chars(std::string_view line) const;
  // One id per token string.
  std::vector<int> encode_tokens(const std::vector<std::string>& tokens) const;
  // Concatenates symbol strings, skipping the reserved ids.
  std::string decode_to_text(const std::vector<int>& ids) const;

  void save(std::ostream& os) const;
  void save_file(const std::string& path) const;
  static Vocabulary load(std::istream& is);
  static Vocabulary load_file(const std::string& path);

  // Most frequent code points of `lines`, capped at max_size total
  // entries (reserved ids included).  Ties break on code point order.
  static Vocabulary build_chars(const std::vector<std::string>& lines,
                                std::size_t max_size);
  // Same over whitespace-separated tokens; ties break lexicographically.
  static Vocabulary build_tokens(const std::vector<std::string>& lines,
                                 std::size_t max_size);

private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace charnmt
