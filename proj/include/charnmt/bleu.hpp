// SPDX-License-Identifier: Apache-2.0
#pragma once

// Corpus-level BLEU over whitespace tokens, n-gram orders 1..4, with
// the standard brevity penalty.  Orders for which the hypothesis
// corpus contains no n-grams at all are dropped from the geometric
// mean (otherwise short-sentence corpora would always score zero);
// optional add-one smoothing applies to zero match counts at n > 1.

#include <cstddef>
#include <string>
#include <vector>

namespace charnmt {

struct BleuStats {
  // Per order (index 0 is unigram): clipped matches and hypothesis
  // n-gram totals summed over the corpus.
  std::size_t matched[4] = {0, 0, 0, 0};
  std::size_t total[4] = {0, 0, 0, 0};
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;

  double brevity_penalty() const;
  double score(bool smooth_add_one) const;  // 0..100
};

BleuStats bleu_stats(const std::vector<std::string>& hypotheses,
                     const std::vector<std::string>& references);

double corpus_bleu(const std::vector<std::string>& hypotheses,
                   const std::vector<std::string>& references,
                   bool smooth_add_one = false);

}  // namespace charnmt
