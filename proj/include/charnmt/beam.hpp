// SPDX-License-Identifier: Apache-2.0
#pragma once

// Beam and greedy decoding over an abstract stepper, so the search is
// testable against exhaustive enumeration on toy models.  A Stepper
// provides:
//   using State = <copyable>;
//   std::size_t vocab_size() const;
//   int eos_symbol() const;
//   const std::vector<int>& banned_symbols() const;  // never emitted
//   int initial_symbol() const;                      // BOS equivalent
//   State initial_state() const;
//   Tensor<T> step(const std::vector<State>& states,
//                  const std::vector<int>& prev_symbols,
//                  std::vector<State>& next_states);  // log-probs [V x n]
//
// The model-backed stepper batches all live hypotheses into one matrix
// per step.

#include <algorithm>
#include <cstddef>
#include <map>
#include <vector>

#include "charnmt/model.hpp"
#include "charnmt/ops.hpp"
#include "charnmt/vocab.hpp"

namespace charnmt {

// One live or finished hypothesis; symbols exclude BOS and EOS.  The
// cumulative log-probability includes the EOS step once finished.
template <typename State>
struct BeamHypothesis {
  std::vector<int> symbols;
  double logp = 0.0;
  State state;
  bool finished = false;
};

struct DecodeResult {
  std::vector<int> symbols;    // BOS/EOS stripped
  double logp = 0.0;           // cumulative log-probability
  double score = 0.0;          // ranking score (normalized if enabled)
  bool truncated = false;      // no hypothesis finished within max_len
};

namespace detail {

// Score used for final ranking.  Length counts emitted symbols plus
// the EOS step for finished hypotheses, so it is always >= 1 for any
// scored hypothesis (an immediate EOS has length 1).
inline double normalized_score(double logp, std::size_t n_symbols,
                               bool finished, bool normalize) {
  if (!normalize) return logp;
  const std::size_t len = n_symbols + (finished ? 1 : 0);
  return logp / static_cast<double>(len == 0 ? 1 : len);
}

}  // namespace detail

template <typename T, typename Stepper>
DecodeResult beam_search(Stepper& stepper, std::size_t width,
                         std::size_t max_len, bool length_normalize = true) {
  require_shape(width >= 1, "beam_search", "width must be >= 1");
  require_shape(max_len >= 1, "beam_search", "max_len must be >= 1");
  using State = typename Stepper::State;
  using Hyp = BeamHypothesis<State>;

  const int eos = stepper.eos_symbol();
  std::vector<char> banned(stepper.vocab_size(), 0);
  for (int b : stepper.banned_symbols())
    banned[static_cast<std::size_t>(b)] = 1;

  std::vector<Hyp> live;
  live.push_back(Hyp{{}, 0.0, stepper.initial_state(), false});
  std::vector<Hyp> completed;

  for (std::size_t step = 0; step < max_len; ++step) {
    if (live.empty() || completed.size() >= width) break;

    std::vector<State> states;
    std::vector<int> prev;
    states.reserve(live.size());
    for (const Hyp& h : live) {
      states.push_back(h.state);
      prev.push_back(h.symbols.empty() ? stepper.initial_symbol()
                                       : h.symbols.back());
    }
    std::vector<State> next_states;
    Tensor<T> logp = stepper.step(states, prev, next_states);
    const std::size_t v = logp.rows(), n = logp.cols();

    struct Candidate {
      double logp;
      int symbol;
      std::size_t parent;
    };
    std::vector<Candidate> cands;
    cands.reserve(n * v);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t s = 0; s < v; ++s) {
        if (banned[s]) continue;
        cands.push_back(Candidate{
            live[j].logp + static_cast<double>(logp.data()[s * n + j]),
            static_cast<int>(s), j});
      }
    const std::size_t keep = std::min(width, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + keep, cands.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.logp != b.logp) return a.logp > b.logp;
                        if (a.symbol != b.symbol) return a.symbol < b.symbol;
                        return a.parent < b.parent;
                      });

    std::vector<Hyp> next_live;
    for (std::size_t c = 0; c < keep; ++c) {
      const Candidate& cand = cands[c];
      if (cand.symbol == eos) {
        Hyp done = live[cand.parent];
        done.logp = cand.logp;
        done.finished = true;
        completed.push_back(std::move(done));
      } else {
        Hyp h;
        h.symbols = live[cand.parent].symbols;
        h.symbols.push_back(cand.symbol);
        h.logp = cand.logp;
        h.state = next_states[cand.parent];
        next_live.push_back(std::move(h));
      }
    }
    live = std::move(next_live);
  }

  auto better = [&](const Hyp& a, const Hyp& b) {
    const double sa = detail::normalized_score(a.logp, a.symbols.size(),
                                               a.finished, length_normalize);
    const double sb = detail::normalized_score(b.logp, b.symbols.size(),
                                               b.finished, length_normalize);
    if (sa != sb) return sa > sb;
    return a.symbols < b.symbols;
  };

  DecodeResult result;
  const std::vector<Hyp>& pool = completed.empty() ? live : completed;
  if (pool.empty()) {
    // Width-1 search where the only candidate was EOS-banned... cannot
    // happen (EOS is never banned), but fail safe with an empty result.
    result.truncated = true;
    return result;
  }
  const Hyp* best = &pool[0];
  for (const Hyp& h : pool)
    if (better(h, *best)) best = &h;
  result.symbols = best->symbols;
  result.logp = best->logp;
  result.score = detail::normalized_score(best->logp, best->symbols.size(),
                                          best->finished, length_normalize);
  result.truncated = completed.empty();
  return result;
}

template <typename T, typename Stepper>
DecodeResult greedy_decode(Stepper& stepper, std::size_t max_len) {
  require_shape(max_len >= 1, "greedy_decode", "max_len must be >= 1");
  using State = typename Stepper::State;

  const int eos = stepper.eos_symbol();
  std::vector<char> banned(stepper.vocab_size(), 0);
  for (int b : stepper.banned_symbols())
    banned[static_cast<std::size_t>(b)] = 1;

  DecodeResult result;
  State state = stepper.initial_state();
  int prev = stepper.initial_symbol();
  for (std::size_t step = 0; step < max_len; ++step) {
    std::vector<State> next_states;
    Tensor<T> logp = stepper.step({state}, {prev}, next_states);
    int best = -1;
    double best_lp = 0;
    for (std::size_t s = 0; s < logp.rows(); ++s) {
      if (banned[s]) continue;
      const double lp = static_cast<double>(logp.data()[s]);
      if (best < 0 || lp > best_lp) {
        best = static_cast<int>(s);
        best_lp = lp;
      }
    }
    result.logp += best_lp;
    if (best == eos) {
      result.score = result.logp /
                     static_cast<double>(result.symbols.size() + 1);
      return result;
    }
    result.symbols.push_back(best);
    state = next_states[0];
    prev = best;
  }
  result.truncated = true;
  result.score =
      result.logp / static_cast<double>(std::max<std::size_t>(
                        result.symbols.size(), 1));
  return result;
}

// Stepper over a trained model and one encoded source sentence.  All
// live hypotheses advance as columns of a single batch; the encoder
// outputs are tiled per hypothesis count and cached.
template <typename T>
class ModelStepper {
public:
  struct State {
    std::vector<T> s1, s2;
  };

  ModelStepper(const Model<T>& model, const EncodedSource<T>& src)
      : model_(model), src_(src), banned_{Vocabulary::kPad, Vocabulary::kBos} {}

  std::size_t vocab_size() const {
    return model_.config().target_vocab_size;
  }
  int eos_symbol() const { return Vocabulary::kEos; }
  int initial_symbol() const { return Vocabulary::kBos; }
  const std::vector<int>& banned_symbols() const { return banned_; }

  State initial_state() const {
    return State{src_.enc.init1.values(), src_.enc.init2.values()};
  }

  Tensor<T> step(const std::vector<State>& states,
                 const std::vector<int>& prev, std::vector<State>& next) {
    const std::size_t n = states.size();
    const std::size_t dh = model_.config().decoder_hidden;
    Tensor<T> s1 = Tensor<T>::zeros({dh, n});
    Tensor<T> s2 = Tensor<T>::zeros({dh, n});
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < dh; ++i) {
        s1.data()[i * n + j] = states[j].s1[i];
        s2.data()[i * n + j] = states[j].s2[i];
      }
    const Tiled& tiled = tiles(n);
    const std::vector<std::size_t> counts(n, src_.enc.seg_counts[0]);
    auto out = model_.decode_cols(prev, s1, s2, tiled.segments, tiled.keys,
                                  src_.enc.k_max, counts);
    next.assign(n, State{std::vector<T>(dh), std::vector<T>(dh)});
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < dh; ++i) {
        next[j].s1[i] = out.state1.data()[i * n + j];
        next[j].s2[i] = out.state2.data()[i * n + j];
      }
    return out.logp;
  }

private:
  struct Tiled {
    Tensor<T> segments, keys;
  };

  const Tiled& tiles(std::size_t n) {
    auto it = tiles_.find(n);
    if (it == tiles_.end()) {
      Tiled t{tile_cols(src_.enc.segments, n), tile_cols(src_.enc.keys, n)};
      it = tiles_.emplace(n, std::move(t)).first;
    }
    return it->second;
  }

  const Model<T>& model_;
  const EncodedSource<T>& src_;
  std::vector<int> banned_;
  std::map<std::size_t, Tiled> tiles_;
};

struct DecodeOptions {
  std::size_t width = 20;
  // 0 selects the default bound of 3 * source length + 10.
  std::size_t max_len = 0;
  bool length_normalize = true;
  bool greedy = false;
};

inline std::size_t default_max_len(std::size_t source_length) {
  return 3 * source_length + 10;
}

// Decodes each source independently; output order matches input order.
template <typename T>
std::vector<DecodeResult> translate_batch(
    const Model<T>& model, const std::vector<std::vector<int>>& sources,
    const DecodeOptions& opts) {
  std::vector<DecodeResult> out;
  out.reserve(sources.size());
  for (const auto& source : sources) {
    EncodedSource<T> enc = model.encode(source);
    ModelStepper<T> stepper(model, enc);
    const std::size_t max_len =
        opts.max_len ? opts.max_len : default_max_len(source.size());
    if (opts.greedy)
      out.push_back(greedy_decode<T>(stepper, max_len));
    else
      out.push_back(beam_search<T>(stepper, opts.width, max_len,
                                   opts.length_normalize));
  }
  return out;
}

}  // namespace charnmt
