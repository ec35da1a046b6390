// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "charnmt/rng.hpp"

namespace charnmt {

// Aligned sentence pairs for one language pair.
struct ParallelCorpus {
  std::string tag;  // e.g. "de-en"; informational only
  std::vector<std::string> source;
  std::vector<std::string> target;

  std::size_t size() const { return source.size(); }
};

// Reads two newline-delimited UTF-8 files of equal length.
ParallelCorpus load_parallel(const std::string& source_path,
                             const std::string& target_path,
                             const std::string& tag = "");

// Keeps pairs whose source length (code points in char mode, tokens
// after re-tokenization in subword mode) does not exceed the limit.
// "No longer than" is inclusive.  Order is preserved.
ParallelCorpus filter_pairs_by_chars(const ParallelCorpus& corpus,
                                     std::size_t max_source_chars);
ParallelCorpus filter_pairs_by_tokens(
    const ParallelCorpus& corpus,
    const std::vector<std::vector<std::string>>& source_tokens,
    std::size_t max_source_tokens,
    std::vector<std::vector<std::string>>* kept_tokens);

// Per-language-pair minibatch quotas.
struct ScheduleSpec {
  std::vector<std::size_t> quotas;

  std::size_t batch_size() const {
    std::size_t n = 0;
    for (std::size_t q : quotas) n += q;
    return n;
  }
};

// Largest-remainder apportionment of `batch` slots proportional to
// corpus sizes; every nonempty corpus gets at least one slot.  Exact
// remainder ties go to the earlier corpus.
ScheduleSpec proportional_quotas(const std::vector<std::size_t>& sizes,
                                 std::size_t batch);

// One training example as (corpus index, pair index).
struct PairRef {
  std::size_t corpus;
  std::size_t pair;
};

// Emits an endless deterministic stream of minibatches, each holding
// exactly quota[p] pairs of corpus p.  Every corpus is consumed in
// seeded shuffled epochs, reshuffled when exhausted, so over one epoch
// of the largest corpus the per-corpus sample counts match the quota
// ratios exactly.
class BalancedScheduler {
public:
  BalancedScheduler(std::vector<std::size_t> corpus_sizes, ScheduleSpec spec,
                    std::uint64_t seed);

  std::vector<PairRef> next_batch();

private:
  struct Cursor {
    std::vector<std::size_t> order;
    std::size_t pos = 0;
  };

  std::size_t draw(std::size_t corpus_idx);

  std::vector<std::size_t> sizes_;
  ScheduleSpec spec_;
  std::vector<Cursor> cursors_;
  Rng rng_;
};

// Truncates every corpus (whole sentences, in order) until its total
// source character count first reaches the smallest corpus total, then
// concatenates the survivors.  Character counts of the results differ
// by at most one sentence.
std::vector<std::string> trim_for_multilingual_bpe(
    const std::vector<std::vector<std::string>>& corpora);

}  // namespace charnmt
