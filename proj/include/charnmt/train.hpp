// SPDX-License-Identifier: Apache-2.0
#pragma once

// Optimization: parameter initialization, global-norm gradient
// clipping, Adam, and the training loop with validation-driven
// stopping and checkpointing.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "charnmt/beam.hpp"
#include "charnmt/bleu.hpp"
#include "charnmt/checkpoint.hpp"
#include "charnmt/config.hpp"
#include "charnmt/corpus.hpp"
#include "charnmt/error.hpp"
#include "charnmt/model.hpp"
#include "charnmt/rng.hpp"
#include "charnmt/tensor.hpp"

namespace charnmt {

// Every weight and bias i.i.d. uniform on [-range, range], in a fixed
// parameter order, so a seed fully determines the model.
template <typename T>
void init_parameters(ParamSet<T>& params, double range, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& item : params)
    for (T& v : item.tensor.values())
      v = static_cast<T>(rng.uniform(-range, range));
}

template <typename T>
double gradient_norm(const ParamSet<T>& params) {
  double sq = 0;
  for (const auto& item : params) {
    if (!item.tensor.requires_grad()) continue;
    for (const T g : item.tensor.grad())
      sq += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(sq);
}

// Scales all gradients jointly so the global L2 norm does not exceed
// `threshold`; returns the factor applied (1.0 when under threshold,
// including the all-zero case).
template <typename T>
double clip_gradients(ParamSet<T>& params, double threshold) {
  const double norm = gradient_norm(params);
  if (norm <= threshold || norm == 0.0) return 1.0;
  const double factor = threshold / norm;
  for (auto& item : params) {
    if (!item.tensor.requires_grad()) continue;
    for (T& g : item.tensor.grad()) g = static_cast<T>(g * factor);
  }
  return factor;
}

// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8).
template <typename T>
struct AdamState {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<T>> m, v;

  void init(const ParamSet<T>& params) {
    step = 0;
    m.clear();
    v.clear();
    for (const auto& item : params) {
      m.emplace_back(item.tensor.numel(), T(0));
      v.emplace_back(item.tensor.numel(), T(0));
    }
  }
};

template <typename T>
void adam_step(AdamState<T>& opt, ParamSet<T>& params) {
  require_shape(opt.m.size() == params.size(), "adam_step",
                "optimizer state does not match parameter count");
  ++opt.step;
  const double bc1 =
      1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double bc2 =
      1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor<T>& t = params[p].tensor;
    if (!t.requires_grad()) continue;
    const std::vector<T>& grad = t.grad();
    std::vector<T>& m = opt.m[p];
    std::vector<T>& v = opt.v[p];
    T* value = t.data();
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double g = static_cast<double>(grad[i]);
      const double mi = opt.beta1 * static_cast<double>(m[i]) +
                        (1.0 - opt.beta1) * g;
      const double vi = opt.beta2 * static_cast<double>(v[i]) +
                        (1.0 - opt.beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double m_hat = mi / bc1;
      const double v_hat = vi / bc2;
      value[i] = static_cast<T>(
          static_cast<double>(value[i]) -
          opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.epsilon));
    }
  }
}

// ---------------------------------------------------------------------------
// Training loop.

// One corpus prepared for training: encoded ids (source ends with EOS;
// target is BOS ... EOS).
struct PreparedCorpus {
  std::string tag;
  std::vector<std::vector<int>> src;
  std::vector<std::vector<int>> tgt;

  std::size_t size() const { return src.size(); }
};

// Validation inputs plus raw reference text for BLEU.
struct ValSet {
  std::vector<std::vector<int>> src;
  std::vector<std::string> refs;
};

struct TrainResult {
  std::size_t updates = 0;
  double best_bleu = -1.0;
  double final_loss = 0.0;
  bool stopped_by_patience = false;
};

struct TrainSinks {
  std::string checkpoint_path;  // best (or final, without validation)
  std::string val_decode_path;  // "" skips writing decoded validation text
  std::ostream* metrics = nullptr;
};

namespace train_detail {

template <typename T>
std::vector<std::string> decode_val(const Model<T>& model,
                                    const Vocabulary& tgt_vocab,
                                    const ValSet& val, std::size_t beam) {
  DecodeOptions opts;
  opts.width = beam;
  std::vector<DecodeResult> results =
      translate_batch(model, val.src, opts);
  std::vector<std::string> out;
  out.reserve(results.size());
  for (const auto& r : results)
    out.push_back(tgt_vocab.decode_to_text(r.symbols));
  return out;
}

inline void write_lines(const std::string& path,
                        const std::vector<std::string>& lines) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write file: " + path);
  for (const auto& l : lines) os << l << '\n';
}

}  // namespace train_detail

// Runs minibatch updates with the balanced scheduler until the update
// ceiling or until `patience` consecutive validation evaluations fail
// to improve BLEU.  Metrics rows:
//   update <k> <loss> <grad_norm> <clip_factor>
//   eval <k> <bleu>
// The checkpoint on disk is the best-BLEU model (the final model when
// no validation set is given); the decoded validation text that earned
// it is stored alongside.
template <typename T>
TrainResult train_loop(Model<T>& model, const Vocabulary& src_vocab,
                       const Vocabulary& tgt_vocab,
                       const std::vector<PreparedCorpus>& corpora,
                       const ScheduleSpec& schedule, const ValSet* val,
                       const TrainConfig& tc, const TrainSinks& sinks) {
  tc.validate();
  require_shape(!corpora.empty(), "train_loop", "no training corpora");
  std::vector<std::size_t> sizes;
  for (const auto& c : corpora) sizes.push_back(c.size());
  BalancedScheduler scheduler(sizes, schedule, tc.seed);

  AdamState<T> opt;
  opt.learning_rate = tc.learning_rate;
  opt.init(model.params());

  TrainResult result;
  std::size_t evals_without_improvement = 0;
  std::ostream* metrics = sinks.metrics;
  if (metrics) *metrics << std::fixed;

  for (std::size_t update = 1; update <= tc.max_updates; ++update) {
    TrainBatch batch;
    for (const PairRef& ref : scheduler.next_batch()) {
      batch.src.push_back(corpora[ref.corpus].src[ref.pair]);
      batch.tgt.push_back(corpora[ref.corpus].tgt[ref.pair]);
    }

    model.params().zero_grads();
    double loss_value = 0;
    {
      Tape<T> tape;
      Tensor<T> loss = model.teacher_loss(batch);
      loss_value = static_cast<double>(loss.scalar_value());
      if (!std::isfinite(loss_value))
        throw NumericError("non-finite loss at update " +
                           std::to_string(update));
      tape.backward(loss);
    }
    const double norm = gradient_norm(model.params());
    if (!std::isfinite(norm))
      throw NumericError("non-finite gradient norm at update " +
                         std::to_string(update));
    const double factor = clip_gradients(model.params(), tc.clip_threshold);
    adam_step(opt, model.params());

    result.updates = update;
    result.final_loss = loss_value;
    if (metrics)
      *metrics << "update " << update << std::setprecision(6) << " loss "
               << loss_value << " grad_norm " << norm << " clip " << factor
               << '\n';

    if (val && update % tc.eval_every == 0) {
      const std::vector<std::string> decoded =
          train_detail::decode_val(model, tgt_vocab, *val, tc.val_beam);
      const double bleu = corpus_bleu(decoded, val->refs);
      if (metrics)
        *metrics << "eval " << update << std::setprecision(2) << " bleu "
                 << bleu << '\n';
      if (bleu > result.best_bleu) {
        result.best_bleu = bleu;
        evals_without_improvement = 0;
        if (!sinks.checkpoint_path.empty())
          save_checkpoint_file(sinks.checkpoint_path, model, src_vocab,
                               tgt_vocab);
        if (!sinks.val_decode_path.empty())
          train_detail::write_lines(sinks.val_decode_path, decoded);
      } else {
        ++evals_without_improvement;
        if (evals_without_improvement >= std::max<std::size_t>(tc.patience, 1)) {
          result.stopped_by_patience = true;
          break;
        }
      }
    }
  }

  if (!val && !sinks.checkpoint_path.empty())
    save_checkpoint_file(sinks.checkpoint_path, model, src_vocab, tgt_vocab);
  return result;
}

// Greedy per-token accuracy of the current model over given corpora.
template <typename T>
TokenStats token_accuracy(const Model<T>& model,
                          const std::vector<PreparedCorpus>& corpora,
                          std::size_t batch_size = 64) {
  TokenStats stats;
  for (const auto& corpus : corpora) {
    for (std::size_t i = 0; i < corpus.size(); i += batch_size) {
      TrainBatch batch;
      for (std::size_t j = i; j < std::min(i + batch_size, corpus.size());
           ++j) {
        batch.src.push_back(corpus.src[j]);
        batch.tgt.push_back(corpus.tgt[j]);
      }
      model.teacher_loss(batch, &stats);
    }
  }
  return stats;
}

}  // namespace charnmt
