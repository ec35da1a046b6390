// SPDX-License-Identifier: Apache-2.0
#pragma once

// Synthetic character-level parallel corpora for sanity training:
// copy, reversal, and alphabet-rotation (caesar) tasks over a small
// codepoint alphabet.

#include <cstdint>
#include <string>
#include <vector>

namespace charnmt {

enum class ToyTask { kCopy, kReverse, kCaesar };

ToyTask toy_task_from_string(const std::string& name);
std::string to_string(ToyTask task);

struct ToySpec {
  ToyTask task = ToyTask::kCopy;
  std::size_t count = 100;
  // Source symbols; rotation for the caesar task happens by alphabet
  // index, so any codepoints work.
  std::string alphabet = "abcdefghij";
  std::size_t shift = 3;
  std::size_t min_len = 5;
  std::size_t max_len = 15;
  std::uint64_t seed = 1;
};

struct ToyPair {
  std::string source;
  std::string target;
};

std::vector<ToyPair> generate_toy_pairs(const ToySpec& spec);

}  // namespace charnmt
