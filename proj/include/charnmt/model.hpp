// SPDX-License-Identifier: Apache-2.0
#pragma once

// The character-level encoder-decoder: embedding, same-length
// convolution bank, strided max-pooling, highway stack, bidirectional
// GRU encoder, additive attention over segments, and a two-layer GRU
// decoder emitting one symbol per step.  Everything is expressed in
// the differentiable primitives, so one code path serves training
// (under a tape) and inference (without).

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "charnmt/config.hpp"
#include "charnmt/ops.hpp"
#include "charnmt/tensor.hpp"
#include "charnmt/vocab.hpp"

namespace charnmt {

template <typename T>
struct GruParams {
  // Weights act on [input; state] (and [input; reset ⊙ state] for the
  // candidate); biases are per-unit.
  Tensor<T> update_w, update_b;
  Tensor<T> reset_w, reset_b;
  Tensor<T> cand_w, cand_b;
};

// z = sigmoid(Wz [x;h] + bz), r = sigmoid(Wr [x;h] + br),
// cand = tanh(Wh [x; r ⊙ h] + bh), h' = (1 - z) ⊙ h + z ⊙ cand.
template <typename T>
Tensor<T> gru_cell(const GruParams<T>& p, const Tensor<T>& x,
                   const Tensor<T>& h) {
  Tensor<T> xh = concat_rows(x, h);
  Tensor<T> z = sigmoid(add_bias(matmul(p.update_w, xh), p.update_b));
  Tensor<T> r = sigmoid(add_bias(matmul(p.reset_w, xh), p.reset_b));
  Tensor<T> cand =
      tanh_op(add_bias(matmul(p.cand_w, concat_rows(x, mul(r, h))), p.cand_b));
  return add(mul(one_minus(z), h), mul(z, cand));
}

// Encoder output for a batch: segment states live in a blocked layout,
// one contiguous block of k_max columns per sentence.
template <typename T>
struct EncodedBatch {
  Tensor<T> segments;              // [2*encoder_hidden x batch*k_max]
  Tensor<T> keys;                  // [attention_hidden x batch*k_max]
  Tensor<T> init1, init2;          // initial decoder states [dec x batch]
  std::vector<std::size_t> seg_counts;  // valid segments per sentence
  std::size_t batch = 0;
  std::size_t k_max = 0;
};

// Single-sentence encoder output (batch of one).
template <typename T>
struct EncodedSource {
  EncodedBatch<T> enc;
  std::size_t source_length = 0;
  std::size_t segment_count() const { return enc.seg_counts[0]; }
};

template <typename T>
struct DecoderState {
  Tensor<T> layer1, layer2;  // [decoder_hidden x 1]
  int prev_symbol = Vocabulary::kBos;
};

// Intermediate encoder activations for one sentence, used by the
// receptive-field and shape tests.
template <typename T>
struct EncodeTrace {
  Tensor<T> conv_out;        // after ReLU, [N x T_x]
  Tensor<T> pooled;          // [N x ceil(T_x/s)]
  Tensor<T> segment_embs;    // after highway, same shape as pooled
};

// Aligned id sequences for one training batch: src ends with EOS, tgt
// is BOS ... EOS.
struct TrainBatch {
  std::vector<std::vector<int>> src;
  std::vector<std::vector<int>> tgt;
};

struct TokenStats {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const {
    return total == 0 ? 0.0 : static_cast<double>(correct) /
                                  static_cast<double>(total);
  }
};

template <typename T>
class Model {
public:
  explicit Model(ModelConfig config) : cfg_(std::move(config)) {
    cfg_.validate();
    build_params();
  }

  const ModelConfig& config() const { return cfg_; }
  ParamSet<T>& params() { return params_; }
  const ParamSet<T>& params() const { return params_; }

  // ---------------------------------------------------------------
  // Encoder.

  EncodedBatch<T> encode_batch(const std::vector<std::vector<int>>& sources) const {
    require_shape(!sources.empty(), "encode_batch", "empty batch");
    const std::size_t bsz = sources.size();
    std::size_t width_t = 1;
    for (const auto& s : sources) {
      require_shape(!s.empty(), "encode_batch", "empty source sequence");
      width_t = std::max(width_t, s.size());
    }

    // Pad to the batch max and zero out PAD embedding columns so the
    // convolution windows of real positions see zeros beyond each
    // sentence, exactly like a single-sentence encode.
    std::vector<int> flat(bsz * width_t, Vocabulary::kPad);
    Tensor<T> col_mask = Tensor<T>::zeros({1, bsz * width_t});
    std::vector<std::size_t> lengths(bsz);
    for (std::size_t b = 0; b < bsz; ++b) {
      lengths[b] = sources[b].size();
      for (std::size_t t = 0; t < lengths[b]; ++t) {
        flat[b * width_t + t] = sources[b][t];
        col_mask.data()[b * width_t + t] = T(1);
      }
    }

    Tensor<T> x = mul_cols(embed(src_emb_, flat), col_mask);

    Tensor<T> segments_in;  // [segment_input_dim x bsz*k_max]
    std::vector<std::size_t> seg_counts(bsz);
    std::size_t k_max = 0;
    if (!cfg_.filter_widths.empty()) {
      Tensor<T> conv = relu(conv1d_same(x, filters_, cfg_.filter_widths, bsz));
      Tensor<T> pooled = maxpool_stride(conv, cfg_.pool_stride, bsz, lengths);
      segments_in = highway(pooled);
      const std::size_t s = cfg_.pool_stride;
      for (std::size_t b = 0; b < bsz; ++b)
        seg_counts[b] = (lengths[b] + s - 1) / s;
      k_max = (width_t + s - 1) / s;
    } else {
      segments_in = x;
      seg_counts = lengths;
      k_max = width_t;
    }

    // Bidirectional GRU over segments.  Padded segments freeze the
    // state, so each sentence's final forward state (and first valid
    // backward state) matches a lone encode of that sentence.
    std::vector<Tensor<T>> seg_masks(k_max);
    for (std::size_t k = 0; k < k_max; ++k) {
      seg_masks[k] = Tensor<T>::zeros({1, bsz});
      for (std::size_t b = 0; b < bsz; ++b)
        if (k < seg_counts[b]) seg_masks[k].data()[b] = T(1);
    }

    std::vector<Tensor<T>> fwd(k_max), bwd(k_max);
    Tensor<T> h = Tensor<T>::zeros({cfg_.encoder_hidden, bsz});
    for (std::size_t k = 0; k < k_max; ++k) {
      Tensor<T> xk = block_col(segments_in, k, k_max);
      h = mix_cols(seg_masks[k], gru_cell(enc_fwd_, xk, h), h);
      fwd[k] = h;
    }
    h = Tensor<T>::zeros({cfg_.encoder_hidden, bsz});
    for (std::size_t k = k_max; k-- > 0;) {
      Tensor<T> xk = block_col(segments_in, k, k_max);
      h = mix_cols(seg_masks[k], gru_cell(enc_bwd_, xk, h), h);
      bwd[k] = h;
    }

    std::vector<Tensor<T>> per_k(k_max);
    for (std::size_t k = 0; k < k_max; ++k)
      per_k[k] = concat_rows(fwd[k], bwd[k]);

    EncodedBatch<T> enc;
    enc.segments = assemble_cols(per_k);
    enc.keys = matmul(att_key_w_, enc.segments);
    enc.seg_counts = seg_counts;
    enc.batch = bsz;
    enc.k_max = k_max;

    // Initial decoder states from the mean over valid segments.
    Tensor<T> mean_w = Tensor<T>::zeros({1, bsz * k_max});
    for (std::size_t b = 0; b < bsz; ++b)
      for (std::size_t k = 0; k < seg_counts[b]; ++k)
        mean_w.data()[b * k_max + k] =
            T(1) / static_cast<T>(seg_counts[b]);
    Tensor<T> mean = weighted_block_sum(enc.segments, mean_w, k_max);
    enc.init1 = tanh_op(add_bias(matmul(dec_init1_w_, mean), dec_init1_b_));
    enc.init2 = tanh_op(add_bias(matmul(dec_init2_w_, mean), dec_init2_b_));
    return enc;
  }

  EncodedSource<T> encode(const std::vector<int>& source) const {
    EncodedSource<T> out;
    out.enc = encode_batch({source});
    out.source_length = source.size();
    return out;
  }

  // Single-sentence encode that also returns the intermediate
  // convolution and pooling stages (char configs only).
  EncodeTrace<T> encode_with_trace(const std::vector<int>& source) const {
    require_shape(!cfg_.filter_widths.empty(), "encode_with_trace",
                  "trace requires a convolutional config");
    require_shape(!source.empty(), "encode_with_trace",
                  "empty source sequence");
    EncodeTrace<T> trace;
    Tensor<T> x = embed(src_emb_, source);
    trace.conv_out = relu(conv1d_same(x, filters_, cfg_.filter_widths,
                                      std::size_t(1)));
    trace.pooled = maxpool_stride(trace.conv_out, cfg_.pool_stride);
    trace.segment_embs = highway(trace.pooled);
    return trace;
  }

  // ---------------------------------------------------------------
  // Decoder, one batched teacher-forced step at a time.

  struct StepOutput {
    Tensor<T> logp;      // [target_vocab x n]
    Tensor<T> weights;   // attention [1 x n*k_max]
    Tensor<T> state1, state2;
  };

  // Advances every column's decoder by one step.  `segments`/`keys`
  // must hold one block per column of `state1` (the encoder batch for
  // teacher forcing; a tiled single sentence for beam search).
  StepOutput decode_cols(const std::vector<int>& prev_symbols,
                         const Tensor<T>& state1, const Tensor<T>& state2,
                         const Tensor<T>& segments, const Tensor<T>& keys,
                         std::size_t k_max,
                         const std::vector<std::size_t>& seg_counts) const {
    Tensor<T> e = embed(tgt_emb_, prev_symbols);
    // Attention queries the previous top-layer state (Eq. 1 inputs:
    // previous symbol embedding, previous state, segment).
    Tensor<T> q = add_bias(matmul(att_query_w_, concat_rows(e, state2)),
                           att_query_b_);
    Tensor<T> scores =
        matmul(att_score_v_, tanh_op(add(keys, repeat_cols(q, k_max))));
    Tensor<T> weights = masked_block_softmax(scores, k_max, seg_counts);
    Tensor<T> context = weighted_block_sum(segments, weights, k_max);

    Tensor<T> h1 = gru_cell(dec1_, concat_rows(e, context), state1);
    Tensor<T> h2 = gru_cell(dec2_, concat_rows(h1, context), state2);

    Tensor<T> hidden = tanh_op(add_bias(
        matmul(out_hidden_w_,
               concat_rows(std::vector<Tensor<T>>{e, h2, context})),
        out_hidden_b_));
    Tensor<T> logits = add_bias(matmul(out_vocab_w_, hidden), out_vocab_b_);

    StepOutput out;
    out.logp = log_softmax_cols(logits);
    out.weights = weights;
    out.state1 = h1;
    out.state2 = h2;
    return out;
  }

  // Attention weights and context for one sentence (test surface).
  std::pair<Tensor<T>, Tensor<T>> attend(const Tensor<T>& prev_emb,
                                         const Tensor<T>& prev_state,
                                         const EncodedSource<T>& src) const {
    Tensor<T> q = add_bias(
        matmul(att_query_w_, concat_rows(prev_emb, prev_state)), att_query_b_);
    Tensor<T> scores = matmul(
        att_score_v_, tanh_op(add(src.enc.keys, repeat_cols(q, src.enc.k_max))));
    Tensor<T> weights =
        masked_block_softmax(scores, src.enc.k_max, src.enc.seg_counts);
    Tensor<T> context = weighted_block_sum(src.enc.segments, weights,
                                           src.enc.k_max);
    return {weights, context};
  }

  DecoderState<T> initial_state(const EncodedSource<T>& src) const {
    return DecoderState<T>{src.enc.init1, src.enc.init2, Vocabulary::kBos};
  }

  // One decode step for a single sentence; returns the next state and
  // the (softmax) distribution over the target vocabulary.
  std::pair<DecoderState<T>, Tensor<T>> decode_step(
      const DecoderState<T>& state, const EncodedSource<T>& src) const {
    StepOutput out = decode_cols({state.prev_symbol}, state.layer1,
                                 state.layer2, src.enc.segments, src.enc.keys,
                                 src.enc.k_max, src.enc.seg_counts);
    Tensor<T> probs = Tensor<T>::zeros(out.logp.shape());
    for (std::size_t i = 0; i < probs.numel(); ++i)
      probs.data()[i] = std::exp(out.logp.data()[i]);
    DecoderState<T> next{out.state1, out.state2, state.prev_symbol};
    return {next, probs};
  }

  // ---------------------------------------------------------------
  // Teacher-forced loss over a batch.

  // Mean (over sentences) of summed per-symbol negative log-likelihood;
  // optional `stats` collects greedy per-token accuracy on unmasked
  // positions.
  Tensor<T> teacher_loss(const TrainBatch& batch,
                         TokenStats* stats = nullptr) const {
    require_shape(batch.src.size() == batch.tgt.size() && !batch.src.empty(),
                  "teacher_loss", "malformed batch");
    const std::size_t bsz = batch.src.size();
    std::size_t steps = 0;
    for (const auto& t : batch.tgt) {
      require_shape(t.size() >= 2, "teacher_loss",
                    "target must be at least BOS,EOS");
      steps = std::max(steps, t.size() - 1);
    }

    EncodedBatch<T> enc = encode_batch(batch.src);
    Tensor<T> s1 = enc.init1, s2 = enc.init2;
    Tensor<T> loss;
    for (std::size_t t = 0; t < steps; ++t) {
      std::vector<int> prev(bsz, Vocabulary::kPad);
      std::vector<int> gold(bsz, Vocabulary::kPad);
      std::vector<T> mask(bsz, T(0));
      for (std::size_t b = 0; b < bsz; ++b) {
        if (t + 1 < batch.tgt[b].size()) {
          prev[b] = batch.tgt[b][t];
          gold[b] = batch.tgt[b][t + 1];
          mask[b] = T(1);
        }
      }
      StepOutput out = decode_cols(prev, s1, s2, enc.segments, enc.keys,
                                   enc.k_max, enc.seg_counts);
      s1 = out.state1;
      s2 = out.state2;
      Tensor<T> step_loss =
          masked_nll(out.logp, gold, mask, static_cast<T>(bsz));
      loss = (t == 0) ? step_loss : add(loss, step_loss);
      if (stats) {
        const std::vector<int> pred = argmax_cols(out.logp);
        for (std::size_t b = 0; b < bsz; ++b)
          if (mask[b] > T(0)) {
            ++stats->total;
            if (pred[b] == gold[b]) ++stats->correct;
          }
      }
    }
    return loss;
  }

  // Total log-probability of `target` (BOS ... EOS) given `source`,
  // teacher-forcing symbol by symbol.  No tape interaction.
  double sequence_logprob(const std::vector<int>& source,
                          const std::vector<int>& target) const {
    require_shape(target.size() >= 2, "sequence_logprob",
                  "target must be at least BOS,EOS");
    EncodedSource<T> src = encode(source);
    Tensor<T> s1 = src.enc.init1, s2 = src.enc.init2;
    double total = 0;
    for (std::size_t t = 0; t + 1 < target.size(); ++t) {
      StepOutput out =
          decode_cols({target[t]}, s1, s2, src.enc.segments, src.enc.keys,
                      src.enc.k_max, src.enc.seg_counts);
      s1 = out.state1;
      s2 = out.state2;
      total += static_cast<double>(
          out.logp.data()[static_cast<std::size_t>(target[t + 1])]);
    }
    return total;
  }

  // Parameter handles by canonical name (stable, documented order).
  Tensor<T>* parameter(const std::string& name) {
    return params_.find(name);
  }

private:
  void build_params() {
    auto make = [this](const std::string& name, Shape shape) {
      Tensor<T> t = Tensor<T>::zeros(std::move(shape), true);
      params_.add(name, t);
      return t;
    };
    const std::size_t dc = cfg_.source_emb_dim;
    const std::size_t de = cfg_.target_emb_dim;
    const std::size_t eh = cfg_.encoder_hidden;
    const std::size_t dh = cfg_.decoder_hidden;
    const std::size_t ah = cfg_.attention_hidden;
    const std::size_t oh = cfg_.output_hidden;
    const std::size_t seg = cfg_.segment_input_dim();

    src_emb_ = make("source_embedding", {dc, cfg_.source_vocab_size});
    tgt_emb_ = make("target_embedding", {de, cfg_.target_vocab_size});

    for (std::size_t i = 0; i < cfg_.filter_widths.size(); ++i)
      filters_.push_back(make("conv_w" + std::to_string(cfg_.filter_widths[i]),
                              {cfg_.filter_counts[i],
                               dc * cfg_.filter_widths[i]}));

    const std::size_t n = cfg_.total_filters();
    for (std::size_t l = 0; l < cfg_.highway_layers; ++l) {
      const std::string p = "highway" + std::to_string(l + 1);
      highway_.push_back(HighwayParams{
          make(p + "_transform_w", {n, n}), make(p + "_transform_b", {n}),
          make(p + "_gate_w", {n, n}), make(p + "_gate_b", {n})});
    }

    auto make_gru = [&make](const std::string& p, std::size_t in,
                            std::size_t hidden) {
      return GruParams<T>{make(p + "_update_w", {hidden, in + hidden}),
                          make(p + "_update_b", {hidden}),
                          make(p + "_reset_w", {hidden, in + hidden}),
                          make(p + "_reset_b", {hidden}),
                          make(p + "_cand_w", {hidden, in + hidden}),
                          make(p + "_cand_b", {hidden})};
    };
    enc_fwd_ = make_gru("enc_fwd", seg, eh);
    enc_bwd_ = make_gru("enc_bwd", seg, eh);

    dec_init1_w_ = make("dec_init1_w", {dh, 2 * eh});
    dec_init1_b_ = make("dec_init1_b", {dh});
    dec_init2_w_ = make("dec_init2_w", {dh, 2 * eh});
    dec_init2_b_ = make("dec_init2_b", {dh});

    att_query_w_ = make("att_query_w", {ah, de + dh});
    att_query_b_ = make("att_query_b", {ah});
    att_key_w_ = make("att_key_w", {ah, 2 * eh});
    att_score_v_ = make("att_score_v", {1, ah});

    dec1_ = make_gru("dec1", de + 2 * eh, dh);
    dec2_ = make_gru("dec2", dh + 2 * eh, dh);

    out_hidden_w_ = make("out_hidden_w", {oh, de + dh + 2 * eh});
    out_hidden_b_ = make("out_hidden_b", {oh});
    out_vocab_w_ = make("out_vocab_w", {cfg_.target_vocab_size, oh});
    out_vocab_b_ = make("out_vocab_b", {cfg_.target_vocab_size});
  }

  struct HighwayParams {
    Tensor<T> transform_w, transform_b, gate_w, gate_b;
  };

  Tensor<T> highway(const Tensor<T>& x) const {
    Tensor<T> v = x;
    for (const auto& l : highway_) {
      Tensor<T> t = relu(add_bias(matmul(l.transform_w, v), l.transform_b));
      Tensor<T> g = sigmoid(add_bias(matmul(l.gate_w, v), l.gate_b));
      v = add(mul(g, t), mul(one_minus(g), v));
    }
    return v;
  }

  ModelConfig cfg_;
  ParamSet<T> params_;

  Tensor<T> src_emb_, tgt_emb_;
  std::vector<Tensor<T>> filters_;
  std::vector<HighwayParams> highway_;
  GruParams<T> enc_fwd_, enc_bwd_;
  Tensor<T> dec_init1_w_, dec_init1_b_, dec_init2_w_, dec_init2_b_;
  Tensor<T> att_query_w_, att_query_b_, att_key_w_, att_score_v_;
  GruParams<T> dec1_, dec2_;
  Tensor<T> out_hidden_w_, out_hidden_b_, out_vocab_w_, out_vocab_b_;
};

}  // namespace charnmt
