// SPDX-License-Identifier: Apache-2.0
#include "charnmt/toygen.hpp"

#include <algorithm>

#include "charnmt/error.hpp"
#include "charnmt/rng.hpp"
#include "charnmt/utf8.hpp"

namespace charnmt {

ToyTask toy_task_from_string(const std::string& name) {
  if (name == "copy") return ToyTask::kCopy;
  if (name == "reverse") return ToyTask::kReverse;
  if (name == "caesar") return ToyTask::kCaesar;
  throw DataError("unknown toy task: " + name);
}

std::string to_string(ToyTask task) {
  switch (task) {
    case ToyTask::kCopy: return "copy";
    case ToyTask::kReverse: return "reverse";
    case ToyTask::kCaesar: return "caesar";
  }
  throw DataError("unknown toy task value");
}

std::vector<ToyPair> generate_toy_pairs(const ToySpec& spec) {
  const std::u32string alphabet = utf8_decode(spec.alphabet);
  if (alphabet.empty()) throw DataError("toy alphabet is empty");
  if (spec.min_len == 0 || spec.min_len > spec.max_len)
    throw DataError("toy length range must satisfy 1 <= min <= max");

  Rng rng(spec.seed);
  std::vector<ToyPair> pairs;
  pairs.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    const std::size_t len =
        spec.min_len + rng.uniform_int(spec.max_len - spec.min_len + 1);
    std::u32string src(len, U' ');
    for (char32_t& c : src) c = alphabet[rng.uniform_int(alphabet.size())];

    std::u32string tgt = src;
    switch (spec.task) {
      case ToyTask::kCopy:
        break;
      case ToyTask::kReverse:
        std::reverse(tgt.begin(), tgt.end());
        break;
      case ToyTask::kCaesar:
        for (char32_t& c : tgt) {
          const std::size_t idx =
              static_cast<std::size_t>(alphabet.find(c));
          c = alphabet[(idx + spec.shift) % alphabet.size()];
        }
        break;
    }
    pairs.push_back({utf8_encode(src), utf8_encode(tgt)});
  }
  return pairs;
}

}  // namespace charnmt
