// SPDX-License-Identifier: Apache-2.0
#include "charnmt/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "charnmt/error.hpp"
#include "charnmt/utf8.hpp"

namespace charnmt {
namespace {

// n-gram -> count, with the n-gram keyed by its token span.
using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const std::vector<std::string>& tokens,
                         std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::vector<std::string> key(tokens.begin() + i, tokens.begin() + i + n);
    ++counts[std::move(key)];
  }
  return counts;
}

}  // namespace

double BleuStats::brevity_penalty() const {
  if (hyp_length == 0) return 0.0;
  if (hyp_length >= ref_length) return 1.0;
  return std::exp(1.0 - static_cast<double>(ref_length) /
                            static_cast<double>(hyp_length));
}

double BleuStats::score(bool smooth_add_one) const {
  if (hyp_length == 0) return 0.0;
  double log_sum = 0.0;
  std::size_t used_orders = 0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (total[n] == 0) continue;  // no hypothesis n-grams of this order
    double num = static_cast<double>(matched[n]);
    double den = static_cast<double>(total[n]);
    if (num == 0.0) {
      if (smooth_add_one && n > 0) {
        num = 1.0;
        den += 1.0;
      } else {
        return 0.0;
      }
    }
    log_sum += std::log(num / den);
    ++used_orders;
  }
  if (used_orders == 0) return 0.0;
  return 100.0 * brevity_penalty() *
         std::exp(log_sum / static_cast<double>(used_orders));
}

BleuStats bleu_stats(const std::vector<std::string>& hypotheses,
                     const std::vector<std::string>& references) {
  if (hypotheses.size() != references.size())
    throw DataError("hypothesis/reference line counts differ: " +
                    std::to_string(hypotheses.size()) + " vs " +
                    std::to_string(references.size()));
  BleuStats stats;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const std::vector<std::string> hyp = split_ws(hypotheses[i]);
    const std::vector<std::string> ref = split_ws(references[i]);
    stats.hyp_length += hyp.size();
    stats.ref_length += ref.size();
    for (std::size_t n = 0; n < 4; ++n) {
      const NgramCounts hyp_counts = count_ngrams(hyp, n + 1);
      const NgramCounts ref_counts = count_ngrams(ref, n + 1);
      for (const auto& [gram, count] : hyp_counts) {
        stats.total[n] += count;
        const auto it = ref_counts.find(gram);
        if (it != ref_counts.end())
          stats.matched[n] += std::min(count, it->second);
      }
    }
  }
  return stats;
}

double corpus_bleu(const std::vector<std::string>& hypotheses,
                   const std::vector<std::string>& references,
                   bool smooth_add_one) {
  return bleu_stats(hypotheses, references).score(smooth_add_one);
}

}  // namespace charnmt
