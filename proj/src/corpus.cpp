// SPDX-License-Identifier: Apache-2.0
#include "charnmt/corpus.hpp"

#include <algorithm>
#include <fstream>

#include "charnmt/error.hpp"
#include "charnmt/utf8.hpp"

namespace charnmt {

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read corpus file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

ParallelCorpus load_parallel(const std::string& source_path,
                             const std::string& target_path,
                             const std::string& tag) {
  ParallelCorpus c;
  c.tag = tag;
  c.source = read_lines(source_path);
  c.target = read_lines(target_path);
  if (c.source.size() != c.target.size())
    throw DataError("corpus files are not aligned: " + source_path + " has " +
                    std::to_string(c.source.size()) + " lines, " +
                    target_path + " has " + std::to_string(c.target.size()));
  return c;
}

ParallelCorpus filter_pairs_by_chars(const ParallelCorpus& corpus,
                                     std::size_t max_source_chars) {
  ParallelCorpus out;
  out.tag = corpus.tag;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (utf8_decode(corpus.source[i]).size() <= max_source_chars) {
      out.source.push_back(corpus.source[i]);
      out.target.push_back(corpus.target[i]);
    }
  }
  return out;
}

ParallelCorpus filter_pairs_by_tokens(
    const ParallelCorpus& corpus,
    const std::vector<std::vector<std::string>>& source_tokens,
    std::size_t max_source_tokens,
    std::vector<std::vector<std::string>>* kept_tokens) {
  if (source_tokens.size() != corpus.size())
    throw DataError("token list size does not match corpus size");
  ParallelCorpus out;
  out.tag = corpus.tag;
  if (kept_tokens) kept_tokens->clear();
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (source_tokens[i].size() <= max_source_tokens) {
      out.source.push_back(corpus.source[i]);
      out.target.push_back(corpus.target[i]);
      if (kept_tokens) kept_tokens->push_back(source_tokens[i]);
    }
  }
  return out;
}

ScheduleSpec proportional_quotas(const std::vector<std::size_t>& sizes,
                                 std::size_t batch) {
  if (sizes.empty()) throw DataError("no corpora given");
  if (batch < sizes.size())
    throw DataError("batch size " + std::to_string(batch) +
                    " cannot cover " + std::to_string(sizes.size()) +
                    " corpora with one slot each");
  double total = 0;
  for (std::size_t s : sizes) {
    if (s == 0) throw DataError("empty corpus cannot receive a quota");
    total += static_cast<double>(s);
  }
  // Largest-remainder with a floor of one slot per corpus.
  ScheduleSpec spec;
  spec.quotas.assign(sizes.size(), 0);
  std::vector<double> remainder(sizes.size(), 0.0);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double exact =
        static_cast<double>(batch) * static_cast<double>(sizes[i]) / total;
    spec.quotas[i] = std::max<std::size_t>(
        1, static_cast<std::size_t>(exact));
    remainder[i] = exact - static_cast<double>(spec.quotas[i]);
    assigned += spec.quotas[i];
  }
  // Distribute leftovers to the largest remainders; trim overshoot from
  // the smallest (never below one).
  std::vector<std::size_t> idx(sizes.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  while (assigned < batch) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return remainder[a] > remainder[b];
    });
    spec.quotas[idx[0]] += 1;
    remainder[idx[0]] -= 1.0;
    ++assigned;
  }
  while (assigned > batch) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return remainder[a] < remainder[b];
    });
    for (std::size_t i : idx) {
      if (spec.quotas[i] > 1) {
        spec.quotas[i] -= 1;
        remainder[i] += 1.0;
        --assigned;
        break;
      }
    }
  }
  return spec;
}

BalancedScheduler::BalancedScheduler(std::vector<std::size_t> corpus_sizes,
                                     ScheduleSpec spec, std::uint64_t seed)
    : sizes_(std::move(corpus_sizes)), spec_(std::move(spec)), rng_(seed) {
  if (sizes_.size() != spec_.quotas.size())
    throw DataError("schedule lists " + std::to_string(spec_.quotas.size()) +
                    " quotas for " + std::to_string(sizes_.size()) +
                    " corpora");
  for (std::size_t i = 0; i < sizes_.size(); ++i) {
    if (spec_.quotas[i] == 0)
      throw DataError("schedule quota for corpus " + std::to_string(i) +
                      " is zero");
    if (sizes_[i] == 0)
      throw DataError("corpus " + std::to_string(i) +
                      " is empty but has a quota");
  }
  cursors_.resize(sizes_.size());
}

std::size_t BalancedScheduler::draw(std::size_t corpus_idx) {
  Cursor& cur = cursors_[corpus_idx];
  if (cur.pos >= cur.order.size()) {
    cur.order.resize(sizes_[corpus_idx]);
    for (std::size_t i = 0; i < cur.order.size(); ++i) cur.order[i] = i;
    rng_.shuffle(cur.order);
    cur.pos = 0;
  }
  return cur.order[cur.pos++];
}

std::vector<PairRef> BalancedScheduler::next_batch() {
  std::vector<PairRef> batch;
  batch.reserve(spec_.batch_size());
  for (std::size_t c = 0; c < sizes_.size(); ++c)
    for (std::size_t q = 0; q < spec_.quotas[c]; ++q)
      batch.push_back(PairRef{c, draw(c)});
  return batch;
}

std::vector<std::string> trim_for_multilingual_bpe(
    const std::vector<std::vector<std::string>>& corpora) {
  if (corpora.size() < 2)
    throw DataError("multilingual trimming needs at least two corpora");
  std::vector<std::vector<std::size_t>> lens(corpora.size());
  std::vector<std::size_t> totals(corpora.size(), 0);
  for (std::size_t c = 0; c < corpora.size(); ++c) {
    for (const auto& line : corpora[c]) {
      lens[c].push_back(utf8_decode(line).size());
      totals[c] += lens[c].back();
    }
  }
  const std::size_t floor_total = *std::min_element(totals.begin(),
                                                    totals.end());
  std::vector<std::string> combined;
  for (std::size_t c = 0; c < corpora.size(); ++c) {
    std::size_t acc = 0;
    for (std::size_t i = 0; i < corpora[c].size() && acc < floor_total; ++i) {
      combined.push_back(corpora[c][i]);
      acc += lens[c][i];
    }
  }
  return combined;
}

}  // namespace charnmt
