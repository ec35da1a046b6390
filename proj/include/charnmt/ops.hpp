// SPDX-License-Identifier: Apache-2.0
#pragma once

// Differentiable primitives over Tensor<T>.  Every op computes its
// forward value immediately and, when a tape is active and an input
// tracks gradients, records a closure that accumulates (+=) into the
// inputs' gradients.  Matrix products go through Eigen; everything
// else is explicit loops.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "charnmt/tensor.hpp"

namespace charnmt {

template <typename T>
using EigenRowMat =
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<EigenRowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const EigenRowMat<T>>;

// ---------------------------------------------------------------------------
// Matrix product.

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_shape(a.cols() == b.rows(), "matmul",
                "inner extents differ: " + shape_str(a.shape()) + " * " +
                    shape_str(b.shape()));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Shape out_shape = (b.ndim() < 2) ? Shape{m} : Shape{m, n};
  Tensor<T> out = Tensor<T>::zeros(std::move(out_shape));
  {
    ConstMatMap<T> A(a.data(), m, k), B(b.data(), k, n);
    MatMap<T> C(out.data(), m, n);
    C.noalias() = A * B;
  }
  finish_op(
      out,
      [a, b, out, m, k, n]() mutable {
        ConstMatMap<T> A(a.data(), m, k), B(b.data(), k, n),
            dC(out.grad_data(), m, n);
        if (a.requires_grad()) {
          MatMap<T> dA(a.grad_data(), m, k);
          dA.noalias() += dC * B.transpose();
        }
        if (b.requires_grad()) {
          MatMap<T> dB(b.grad_data(), k, n);
          dB.noalias() += A.transpose() * dC;
        }
      },
      a, b);
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic (same-shape operands).

namespace detail {

template <typename T>
inline void require_same_shape(const Tensor<T>& a, const Tensor<T>& b,
                               const char* op) {
  require_shape(a.shape() == b.shape(), op,
                "shapes differ: " + shape_str(a.shape()) + " vs " +
                    shape_str(b.shape()));
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "add");
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  finish_op(
      out,
      [a, b, out, n]() mutable {
        const T* g = out.grad_data();
        if (a.requires_grad()) {
          T* da = a.grad_data();
          for (std::size_t i = 0; i < n; ++i) da[i] += g[i];
        }
        if (b.requires_grad()) {
          T* db = b.grad_data();
          for (std::size_t i = 0; i < n; ++i) db[i] += g[i];
        }
      },
      a, b);
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "sub");
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
  finish_op(
      out,
      [a, b, out, n]() mutable {
        const T* g = out.grad_data();
        if (a.requires_grad()) {
          T* da = a.grad_data();
          for (std::size_t i = 0; i < n; ++i) da[i] += g[i];
        }
        if (b.requires_grad()) {
          T* db = b.grad_data();
          for (std::size_t i = 0; i < n; ++i) db[i] -= g[i];
        }
      },
      a, b);
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "mul");
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  finish_op(
      out,
      [a, b, out, n]() mutable {
        const T* g = out.grad_data();
        if (a.requires_grad()) {
          T* da = a.grad_data();
          const T* bv = b.data();
          for (std::size_t i = 0; i < n; ++i) da[i] += g[i] * bv[i];
        }
        if (b.requires_grad()) {
          T* db = b.grad_data();
          const T* av = a.data();
          for (std::size_t i = 0; i < n; ++i) db[i] += g[i] * av[i];
        }
      },
      a, b);
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T c) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = c * x.data()[i];
  finish_op(
      out,
      [x, out, c, n]() mutable {
        if (!x.requires_grad()) return;
        const T* g = out.grad_data();
        T* dx = x.grad_data();
        for (std::size_t i = 0; i < n; ++i) dx[i] += c * g[i];
      },
      x);
  return out;
}

// y = 1 - x, used by gates.
template <typename T>
Tensor<T> one_minus(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = T(1) - x.data()[i];
  finish_op(
      out,
      [x, out, n]() mutable {
        if (!x.requires_grad()) return;
        const T* g = out.grad_data();
        T* dx = x.grad_data();
        for (std::size_t i = 0; i < n; ++i) dx[i] -= g[i];
      },
      x);
  return out;
}

// ---------------------------------------------------------------------------
// Activations.

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i)
    out.data()[i] = x.data()[i] > T(0) ? x.data()[i] : T(0);
  finish_op(
      out,
      [x, out, n]() mutable {
        if (!x.requires_grad()) return;
        const T* g = out.grad_data();
        const T* v = x.data();
        T* dx = x.grad_data();
        for (std::size_t i = 0; i < n; ++i)
          if (v[i] > T(0)) dx[i] += g[i];
      },
      x);
  return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) {
    const T v = x.data()[i];
    // Branch keeps exp() argument negative for numerical safety.
    out.data()[i] = v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                              : std::exp(v) / (T(1) + std::exp(v));
  }
  finish_op(
      out,
      [x, out, n]() mutable {
        if (!x.requires_grad()) return;
        const T* g = out.grad_data();
        const T* y = out.data();
        T* dx = x.grad_data();
        for (std::size_t i = 0; i < n; ++i) dx[i] += g[i] * y[i] * (T(1) - y[i]);
      },
      x);
  return out;
}

template <typename T>
Tensor<T> tanh_op(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = std::tanh(x.data()[i]);
  finish_op(
      out,
      [x, out, n]() mutable {
        if (!x.requires_grad()) return;
        const T* g = out.grad_data();
        const T* y = out.data();
        T* dx = x.grad_data();
        for (std::size_t i = 0; i < n; ++i) dx[i] += g[i] * (T(1) - y[i] * y[i]);
      },
      x);
  return out;
}

// ---------------------------------------------------------------------------
// Broadcast helpers.

// out[i, j] = m[i, j] + b[i];  b is a length-rows vector (or rows x 1).
template <typename T>
Tensor<T> add_bias(const Tensor<T>& m, const Tensor<T>& b) {
  require_shape(b.cols() == 1 && b.rows() == m.rows(), "add_bias",
                "bias " + shape_str(b.shape()) + " does not match rows of " +
                    shape_str(m.shape()));
  Tensor<T> out = Tensor<T>::zeros(m.shape());
  const std::size_t r = m.rows(), c = m.cols();
  for (std::size_t i = 0; i < r; ++i) {
    const T bi = b.data()[i];
    for (std::size_t j = 0; j < c; ++j)
      out.data()[i * c + j] = m.data()[i * c + j] + bi;
  }
  finish_op(
      out,
      [m, b, out, r, c]() mutable {
        const T* g = out.grad_data();
        if (m.requires_grad()) {
          T* dm = m.grad_data();
          for (std::size_t i = 0; i < r * c; ++i) dm[i] += g[i];
        }
        if (b.requires_grad()) {
          T* db = b.grad_data();
          for (std::size_t i = 0; i < r; ++i) {
            T s = T(0);
            for (std::size_t j = 0; j < c; ++j) s += g[i * c + j];
            db[i] += s;
          }
        }
      },
      m, b);
  return out;
}

// out[i, j] = x[i, j] * row[j];  per-column scaling, used for masking.
template <typename T>
Tensor<T> mul_cols(const Tensor<T>& x, const Tensor<T>& row) {
  require_shape(row.rows() == 1 && row.cols() == x.cols(), "mul_cols",
                "row " + shape_str(row.shape()) + " does not match cols of " +
                    shape_str(x.shape()));
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const std::size_t r = x.rows(), c = x.cols();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      out.data()[i * c + j] = x.data()[i * c + j] * row.data()[j];
  finish_op(
      out,
      [x, row, out, r, c]() mutable {
        const T* g = out.grad_data();
        if (x.requires_grad()) {
          T* dx = x.grad_data();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
              dx[i * c + j] += g[i * c + j] * row.data()[j];
        }
        if (row.requires_grad()) {
          T* dr = row.grad_data();
          for (std::size_t j = 0; j < c; ++j) {
            T s = T(0);
            for (std::size_t i = 0; i < r; ++i)
              s += g[i * c + j] * x.data()[i * c + j];
            dr[j] += s;
          }
        }
      },
      x, row);
  return out;
}

// out[:, j] = mask[j] * on[:, j] + (1 - mask[j]) * off[:, j].
// Column-wise blend; mask is a constant 1 x cols row of {0, 1} used to
// freeze recurrent state on padded positions.
template <typename T>
Tensor<T> mix_cols(const Tensor<T>& mask, const Tensor<T>& on,
                   const Tensor<T>& off) {
  detail::require_same_shape(on, off, "mix_cols");
  require_shape(mask.rows() == 1 && mask.cols() == on.cols(), "mix_cols",
                "mask " + shape_str(mask.shape()) + " does not match cols of " +
                    shape_str(on.shape()));
  Tensor<T> out = Tensor<T>::zeros(on.shape());
  const std::size_t r = on.rows(), c = on.cols();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const T m = mask.data()[j];
      out.data()[i * c + j] =
          m * on.data()[i * c + j] + (T(1) - m) * off.data()[i * c + j];
    }
  finish_op(
      out,
      [mask, on, off, out, r, c]() mutable {
        const T* g = out.grad_data();
        if (on.requires_grad()) {
          T* d = on.grad_data();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
              d[i * c + j] += g[i * c + j] * mask.data()[j];
        }
        if (off.requires_grad()) {
          T* d = off.grad_data();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
              d[i * c + j] += g[i * c + j] * (T(1) - mask.data()[j]);
        }
      },
      on, off);
  return out;
}

// Duplicate each column of q [d x B] into a block of `reps` identical
// columns: out[:, b*reps + k] = q[:, b].
template <typename T>
Tensor<T> repeat_cols(const Tensor<T>& q, std::size_t reps) {
  require_shape(reps > 0, "repeat_cols", "repetition count must be positive");
  const std::size_t r = q.rows(), c = q.cols();
  Tensor<T> out = Tensor<T>::zeros({r, c * reps});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const T v = q.data()[i * c + j];
      for (std::size_t k = 0; k < reps; ++k)
        out.data()[i * c * reps + j * reps + k] = v;
    }
  finish_op(
      out,
      [q, out, r, c, reps]() mutable {
        if (!q.requires_grad()) return;
        const T* g = out.grad_data();
        T* dq = q.grad_data();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) {
            T s = T(0);
            for (std::size_t k = 0; k < reps; ++k)
              s += g[i * c * reps + j * reps + k];
            dq[i * c + j] += s;
          }
      },
      q);
  return out;
}

// Stack tensors along rows: all parts share the column count.
template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  require_shape(!parts.empty(), "concat_rows", "no tensors given");
  const std::size_t c = parts[0].cols();
  std::size_t total_rows = 0;
  for (const auto& p : parts) {
    require_shape(p.cols() == c, "concat_rows",
                  "column counts differ: " + shape_str(parts[0].shape()) +
                      " vs " + shape_str(p.shape()));
    total_rows += p.rows();
  }
  Tensor<T> out = Tensor<T>::zeros({total_rows, c});
  std::size_t row0 = 0;
  for (const auto& p : parts) {
    std::copy(p.data(), p.data() + p.numel(), out.data() + row0 * c);
    row0 += p.rows();
  }
  bool any_grad = false;
  for (const auto& p : parts) any_grad = any_grad || p.requires_grad();
  if (Tape<T>::active() && any_grad) {
    out.set_requires_grad(true);
    out.mark_op_output();
    Tape<T>::active()->record(out.node(), [parts, out, c]() mutable {
      const T* g = out.grad_data();
      std::size_t row0 = 0;
      for (auto& p : parts) {
        if (p.requires_grad()) {
          T* dp = p.grad_data();
          const std::size_t n = p.numel();
          for (std::size_t i = 0; i < n; ++i) dp[i] += g[row0 * c + i];
        }
        row0 += p.rows();
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat_rows(const Tensor<T>& a, const Tensor<T>& b) {
  return concat_rows(std::vector<Tensor<T>>{a, b});
}

// Interleave per-step matrices [d x B] into one [d x B*K] tensor whose
// block b holds that item's K steps contiguously:
// out[:, b*K + k] = steps[k][:, b].
template <typename T>
Tensor<T> assemble_cols(const std::vector<Tensor<T>>& steps) {
  require_shape(!steps.empty(), "assemble_cols", "no tensors given");
  const std::size_t r = steps[0].rows(), bsz = steps[0].cols(),
                    k_count = steps.size();
  for (const auto& s : steps)
    detail::require_same_shape(s, steps[0], "assemble_cols");
  Tensor<T> out = Tensor<T>::zeros({r, bsz * k_count});
  for (std::size_t k = 0; k < k_count; ++k)
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t b = 0; b < bsz; ++b)
        out.data()[i * bsz * k_count + b * k_count + k] =
            steps[k].data()[i * bsz + b];
  bool any_grad = false;
  for (const auto& s : steps) any_grad = any_grad || s.requires_grad();
  if (Tape<T>::active() && any_grad) {
    out.set_requires_grad(true);
    out.mark_op_output();
    Tape<T>::active()->record(out.node(),
                              [steps, out, r, bsz, k_count]() mutable {
                                const T* g = out.grad_data();
                                for (std::size_t k = 0; k < k_count; ++k) {
                                  if (!steps[k].requires_grad()) continue;
                                  T* d = steps[k].grad_data();
                                  for (std::size_t i = 0; i < r; ++i)
                                    for (std::size_t b = 0; b < bsz; ++b)
                                      d[i * bsz + b] +=
                                          g[i * bsz * k_count + b * k_count + k];
                                }
                              });
  }
  return out;
}

// Extract column k of every length-`block` group: out[:, b] = x[:, b*block + k].
// The inverse access pattern of assemble_cols; feeds recurrent steps
// from a blocked layout.
template <typename T>
Tensor<T> block_col(const Tensor<T>& x, std::size_t k, std::size_t block) {
  require_shape(block > 0 && x.cols() % block == 0, "block_col",
                "cols " + std::to_string(x.cols()) +
                    " not divisible by block " + std::to_string(block));
  require_shape(k < block, "block_col",
                "index " + std::to_string(k) + " outside block of " +
                    std::to_string(block));
  const std::size_t r = x.rows(), nb = x.cols() / block, c = x.cols();
  Tensor<T> out = Tensor<T>::zeros({r, nb});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t b = 0; b < nb; ++b)
      out.data()[i * nb + b] = x.data()[i * c + b * block + k];
  finish_op(
      out,
      [x, out, k, block, r, nb, c]() mutable {
        if (!x.requires_grad()) return;
        const T* g = out.grad_data();
        T* dx = x.grad_data();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t b = 0; b < nb; ++b)
            dx[i * c + b * block + k] += g[i * nb + b];
      },
      x);
  return out;
}

// out[:, j] = x[:, cols[j]]; duplicate indices allowed.
template <typename T>
Tensor<T> select_cols(const Tensor<T>& x, const std::vector<std::size_t>& cols) {
  require_shape(!cols.empty(), "select_cols", "empty column list");
  const std::size_t r = x.rows(), c = x.cols(), n = cols.size();
  for (std::size_t j : cols)
    require_shape(j < c, "select_cols",
                  "column " + std::to_string(j) + " outside " +
                      shape_str(x.shape()));
  Tensor<T> out = Tensor<T>::zeros({r, n});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out.data()[i * n + j] = x.data()[i * c + cols[j]];
  finish_op(
      out,
      [x, out, cols, r, c, n]() mutable {
        if (!x.requires_grad()) return;
        const T* g = out.grad_data();
        T* dx = x.grad_data();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < n; ++j)
            dx[i * c + cols[j]] += g[i * n + j];
      },
      x);
  return out;
}

// Horizontal tiling: out = [x x ... x] with `reps` copies.
template <typename T>
Tensor<T> tile_cols(const Tensor<T>& x, std::size_t reps) {
  require_shape(reps > 0, "tile_cols", "repetition count must be positive");
  const std::size_t r = x.rows(), c = x.cols();
  Tensor<T> out = Tensor<T>::zeros({r, c * reps});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t rep = 0; rep < reps; ++rep)
      std::copy(x.data() + i * c, x.data() + (i + 1) * c,
                out.data() + i * c * reps + rep * c);
  finish_op(
      out,
      [x, out, r, c, reps]() mutable {
        if (!x.requires_grad()) return;
        const T* g = out.grad_data();
        T* dx = x.grad_data();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t rep = 0; rep < reps; ++rep)
            for (std::size_t j = 0; j < c; ++j)
              dx[i * c + j] += g[i * c * reps + rep * c + j];
      },
      x);
  return out;
}

// ---------------------------------------------------------------------------
// Softmax family (column-wise over rank-2, whole tensor for rank-1).

template <typename T>
Tensor<T> softmax_cols(const Tensor<T>& x) {
  const std::size_t r = x.rows(), c = x.cols();
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  for (std::size_t j = 0; j < c; ++j) {
    T mx = x.data()[j];
    for (std::size_t i = 1; i < r; ++i) mx = std::max(mx, x.data()[i * c + j]);
    T z = T(0);
    for (std::size_t i = 0; i < r; ++i) {
      const T e = std::exp(x.data()[i * c + j] - mx);
      out.data()[i * c + j] = e;
      z += e;
    }
    for (std::size_t i = 0; i < r; ++i) out.data()[i * c + j] /= z;
  }
  finish_op(
      out,
      [x, out, r, c]() mutable {
        if (!x.requires_grad()) return;
        const T* g = out.grad_data();
        const T* y = out.data();
        T* dx = x.grad_data();
        for (std::size_t j = 0; j < c; ++j) {
          T dot = T(0);
          for (std::size_t i = 0; i < r; ++i)
            dot += g[i * c + j] * y[i * c + j];
          for (std::size_t i = 0; i < r; ++i)
            dx[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
        }
      },
      x);
  return out;
}

template <typename T>
Tensor<T> log_softmax_cols(const Tensor<T>& x) {
  const std::size_t r = x.rows(), c = x.cols();
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  for (std::size_t j = 0; j < c; ++j) {
    T mx = x.data()[j];
    for (std::size_t i = 1; i < r; ++i) mx = std::max(mx, x.data()[i * c + j]);
    T z = T(0);
    for (std::size_t i = 0; i < r; ++i)
      z += std::exp(x.data()[i * c + j] - mx);
    const T lse = mx + std::log(z);
    for (std::size_t i = 0; i < r; ++i)
      out.data()[i * c + j] = x.data()[i * c + j] - lse;
  }
  finish_op(
      out,
      [x, out, r, c]() mutable {
        if (!x.requires_grad()) return;
        const T* g = out.grad_data();
        const T* y = out.data();
        T* dx = x.grad_data();
        for (std::size_t j = 0; j < c; ++j) {
          T gs = T(0);
          for (std::size_t i = 0; i < r; ++i) gs += g[i * c + j];
          for (std::size_t i = 0; i < r; ++i)
            dx[i * c + j] += g[i * c + j] - std::exp(y[i * c + j]) * gs;
        }
      },
      x);
  return out;
}

// Softmax over a 1 x B*K row of scores, independently per length-K
// block, restricted to the first counts[b] entries of block b; masked
// entries come out exactly 0.  Used for attention over padded batches.
template <typename T>
Tensor<T> masked_block_softmax(const Tensor<T>& scores, std::size_t block,
                               const std::vector<std::size_t>& counts) {
  require_shape(scores.rows() == 1, "masked_block_softmax",
                "expected a row vector, got " + shape_str(scores.shape()));
  require_shape(block > 0 && scores.cols() % block == 0,
                "masked_block_softmax",
                "cols " + std::to_string(scores.cols()) +
                    " not divisible by block " + std::to_string(block));
  const std::size_t nb = scores.cols() / block;
  require_shape(counts.size() == nb, "masked_block_softmax",
                "got " + std::to_string(counts.size()) + " counts for " +
                    std::to_string(nb) + " blocks");
  for (std::size_t b = 0; b < nb; ++b)
    require_shape(counts[b] >= 1 && counts[b] <= block,
                  "masked_block_softmax",
                  "count " + std::to_string(counts[b]) +
                      " outside [1, " + std::to_string(block) + "]");
  Tensor<T> out = Tensor<T>::zeros(scores.shape());
  for (std::size_t b = 0; b < nb; ++b) {
    const T* s = scores.data() + b * block;
    T* y = out.data() + b * block;
    const std::size_t k = counts[b];
    T mx = s[0];
    for (std::size_t i = 1; i < k; ++i) mx = std::max(mx, s[i]);
    T z = T(0);
    for (std::size_t i = 0; i < k; ++i) {
      y[i] = std::exp(s[i] - mx);
      z += y[i];
    }
    for (std::size_t i = 0; i < k; ++i) y[i] /= z;
  }
  finish_op(
      out,
      [scores, out, block, counts, nb]() mutable {
        if (!scores.requires_grad()) return;
        const T* g = out.grad_data();
        const T* y = out.data();
        T* dx = scores.grad_data();
        for (std::size_t b = 0; b < nb; ++b) {
          const std::size_t o = b * block, k = counts[b];
          T dot = T(0);
          for (std::size_t i = 0; i < k; ++i) dot += g[o + i] * y[o + i];
          for (std::size_t i = 0; i < k; ++i)
            dx[o + i] += y[o + i] * (g[o + i] - dot);
        }
      },
      scores);
  return out;
}

// out[:, b] = sum_k w[0, b*block + k] * h[:, b*block + k].
// Contracts each length-`block` group of columns with its weight row
// slice; computes attention contexts and masked means.
template <typename T>
Tensor<T> weighted_block_sum(const Tensor<T>& h, const Tensor<T>& w,
                             std::size_t block) {
  require_shape(w.rows() == 1 && w.cols() == h.cols(), "weighted_block_sum",
                "weights " + shape_str(w.shape()) + " do not match " +
                    shape_str(h.shape()));
  require_shape(block > 0 && h.cols() % block == 0, "weighted_block_sum",
                "cols " + std::to_string(h.cols()) +
                    " not divisible by block " + std::to_string(block));
  const std::size_t r = h.rows(), nb = h.cols() / block, c = h.cols();
  Tensor<T> out = Tensor<T>::zeros({r, nb});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t b = 0; b < nb; ++b) {
      T s = T(0);
      for (std::size_t k = 0; k < block; ++k)
        s += w.data()[b * block + k] * h.data()[i * c + b * block + k];
      out.data()[i * nb + b] = s;
    }
  finish_op(
      out,
      [h, w, out, block, r, nb, c]() mutable {
        const T* g = out.grad_data();
        if (h.requires_grad()) {
          T* dh = h.grad_data();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t b = 0; b < nb; ++b) {
              const T gi = g[i * nb + b];
              for (std::size_t k = 0; k < block; ++k)
                dh[i * c + b * block + k] += gi * w.data()[b * block + k];
            }
        }
        if (w.requires_grad()) {
          T* dw = w.grad_data();
          for (std::size_t b = 0; b < nb; ++b)
            for (std::size_t k = 0; k < block; ++k) {
              T s = T(0);
              for (std::size_t i = 0; i < r; ++i)
                s += g[i * nb + b] * h.data()[i * c + b * block + k];
              dw[b * block + k] += s;
            }
        }
      },
      h, w);
  return out;
}

// ---------------------------------------------------------------------------
// Embedding lookup.

// out[:, i] = table[:, ids[i]].  table is [dim x vocab].
template <typename T>
Tensor<T> embed(const Tensor<T>& table, const std::vector<int>& ids) {
  require_shape(!ids.empty(), "embed", "empty id list");
  const std::size_t d = table.rows(), v = table.cols(), n = ids.size();
  for (int id : ids)
    require_shape(id >= 0 && static_cast<std::size_t>(id) < v, "embed",
                  "symbol id " + std::to_string(id) +
                      " outside vocabulary of size " + std::to_string(v));
  Tensor<T> out = Tensor<T>::zeros({d, n});
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out.data()[i * n + j] = table.data()[i * v + ids[j]];
  finish_op(
      out,
      [table, out, ids, d, v, n]() mutable {
        if (!table.requires_grad()) return;
        const T* g = out.grad_data();
        T* dt = table.grad_data();
        for (std::size_t i = 0; i < d; ++i)
          for (std::size_t j = 0; j < n; ++j)
            dt[i * v + ids[j]] += g[i * n + j];
      },
      table);
  return out;
}

// ---------------------------------------------------------------------------
// Convolution and pooling over per-item column blocks.

// Bank of same-length 1-D convolutions over x [d x batch*width_t], where
// each item occupies a contiguous block of width_t columns.  filters[i]
// is [n_i x d*w_i] (output channel by flattened window, row-major over
// (input row, window offset)) for window size widths[i].  No bias term.
// Windows are centred with floor((w-1)/2) columns of implicit zeros on
// the left and ceil((w-1)/2) on the right, so each block keeps its
// width.  Output rows are the filter banks stacked in `widths` order.
template <typename T>
Tensor<T> conv1d_same(const Tensor<T>& x, const std::vector<Tensor<T>>& filters,
                      const std::vector<std::size_t>& widths,
                      std::size_t batch) {
  require_shape(filters.size() == widths.size(), "conv1d_same",
                "filter and width counts differ");
  require_shape(!filters.empty(), "conv1d_same", "empty filter bank");
  require_shape(batch > 0 && x.cols() % batch == 0, "conv1d_same",
                "cols " + std::to_string(x.cols()) +
                    " not divisible by batch " + std::to_string(batch));
  const std::size_t d = x.rows(), width_t = x.cols() / batch, c = x.cols();
  std::size_t total_out = 0;
  for (std::size_t i = 0; i < filters.size(); ++i) {
    require_shape(filters[i].cols() == d * widths[i], "conv1d_same",
                  "filter " + shape_str(filters[i].shape()) +
                      " does not match input rows " + std::to_string(d) +
                      " and width " + std::to_string(widths[i]));
    total_out += filters[i].rows();
  }
  Tensor<T> out = Tensor<T>::zeros({total_out, c});

  // Per width, gather the zero-padded windows (im2col) and multiply.
  // The gathered patches are also what the backward pass needs, so the
  // closure reuses them.
  std::vector<std::vector<T>> patches(filters.size());
  std::size_t row0 = 0;
  for (std::size_t f = 0; f < filters.size(); ++f) {
    const std::size_t w = widths[f], nf = filters[f].rows();
    const std::size_t left = (w - 1) / 2;
    std::vector<T>& p = patches[f];
    p.assign(d * w * c, T(0));
    for (std::size_t row = 0; row < d; ++row)
      for (std::size_t off = 0; off < w; ++off) {
        T* dst = p.data() + (row * w + off) * c;
        const T* src = x.data() + row * c;
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t t = 0; t < width_t; ++t) {
            const std::ptrdiff_t ti =
                static_cast<std::ptrdiff_t>(t + off) -
                static_cast<std::ptrdiff_t>(left);
            if (ti >= 0 && ti < static_cast<std::ptrdiff_t>(width_t))
              dst[b * width_t + t] = src[b * width_t + ti];
          }
      }
    ConstMatMap<T> F(filters[f].data(), nf, d * w), P(p.data(), d * w, c);
    MatMap<T> O(out.data() + row0 * c, nf, c);
    O.noalias() = F * P;
    row0 += nf;
  }

  bool any_grad = x.requires_grad();
  for (const auto& fl : filters) any_grad = any_grad || fl.requires_grad();
  if (Tape<T>::active() && any_grad) {
    out.set_requires_grad(true);
    out.mark_op_output();
    Tape<T>::active()->record(
        out.node(), [x, filters, widths, batch, out,
                     patches = std::move(patches), d, width_t, c]() mutable {
          std::size_t row0 = 0;
          for (std::size_t f = 0; f < filters.size(); ++f) {
            const std::size_t w = widths[f], nf = filters[f].rows();
            const std::size_t left = (w - 1) / 2;
            ConstMatMap<T> dO(out.grad_data() + row0 * c, nf, c);
            if (filters[f].requires_grad()) {
              ConstMatMap<T> P(patches[f].data(), d * w, c);
              MatMap<T> dF(filters[f].grad_data(), nf, d * w);
              dF.noalias() += dO * P.transpose();
            }
            if (x.requires_grad()) {
              ConstMatMap<T> F(filters[f].data(), nf, d * w);
              EigenRowMat<T> dP = F.transpose() * dO;
              T* dx = x.grad_data();
              for (std::size_t row = 0; row < d; ++row)
                for (std::size_t off = 0; off < w; ++off) {
                  const T* src = dP.data() + (row * w + off) * c;
                  for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t t = 0; t < width_t; ++t) {
                      const std::ptrdiff_t ti =
                          static_cast<std::ptrdiff_t>(t + off) -
                          static_cast<std::ptrdiff_t>(left);
                      if (ti >= 0 && ti < static_cast<std::ptrdiff_t>(width_t))
                        dx[row * c + b * width_t + ti] +=
                            src[b * width_t + t];
                    }
                }
            }
            row0 += nf;
          }
        });
  }
  return out;
}

// Non-overlapping stride-s max pooling along time within each item's
// column block.  lengths[b] <= width_t is the number of valid columns
// of block b; segment k of block b covers [k*s, min((k+1)*s, lengths[b]))
// so a short final segment still pools.  Output has ceil(width_t / s)
// segments per block; segments at or past ceil(lengths[b]/s) are zero.
// Ties take the earliest column.
template <typename T>
Tensor<T> maxpool_stride(const Tensor<T>& x, std::size_t s, std::size_t batch,
                         const std::vector<std::size_t>& lengths) {
  require_shape(s > 0, "maxpool_stride", "stride must be positive");
  require_shape(batch > 0 && x.cols() % batch == 0, "maxpool_stride",
                "cols " + std::to_string(x.cols()) +
                    " not divisible by batch " + std::to_string(batch));
  require_shape(lengths.size() == batch, "maxpool_stride",
                "got " + std::to_string(lengths.size()) + " lengths for " +
                    std::to_string(batch) + " items");
  const std::size_t r = x.rows(), width_t = x.cols() / batch;
  for (std::size_t len : lengths)
    require_shape(len >= 1 && len <= width_t, "maxpool_stride",
                  "length " + std::to_string(len) + " outside [1, " +
                      std::to_string(width_t) + "]");
  const std::size_t k_max = (width_t + s - 1) / s;
  Tensor<T> out = Tensor<T>::zeros({r, batch * k_max});
  // Flat column index into x of each selected maximum; SIZE_MAX marks
  // padded segments.
  auto arg = std::make_shared<std::vector<std::size_t>>(r * batch * k_max,
                                                        SIZE_MAX);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t kb = (lengths[b] + s - 1) / s;
      for (std::size_t k = 0; k < kb; ++k) {
        const std::size_t t0 = k * s, t1 = std::min((k + 1) * s, lengths[b]);
        std::size_t best = b * width_t + t0;
        T bv = x.data()[i * x.cols() + best];
        for (std::size_t t = t0 + 1; t < t1; ++t) {
          const T v = x.data()[i * x.cols() + b * width_t + t];
          if (v > bv) {
            bv = v;
            best = b * width_t + t;
          }
        }
        out.data()[i * batch * k_max + b * k_max + k] = bv;
        (*arg)[i * batch * k_max + b * k_max + k] = best;
      }
    }
  finish_op(
      out,
      [x, out, arg, r, n_out = batch * k_max]() mutable {
        if (!x.requires_grad()) return;
        const T* g = out.grad_data();
        T* dx = x.grad_data();
        const std::size_t xc = x.cols();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < n_out; ++j) {
            const std::size_t src = (*arg)[i * n_out + j];
            if (src != SIZE_MAX) dx[i * xc + src] += g[i * n_out + j];
          }
      },
      x);
  return out;
}

// Single-item pooling over every column.
template <typename T>
Tensor<T> maxpool_stride(const Tensor<T>& x, std::size_t s) {
  return maxpool_stride(x, s, 1, {x.cols()});
}

// ---------------------------------------------------------------------------
// Reductions and losses.

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
  T s = T(0);
  for (std::size_t i = 0; i < x.numel(); ++i) s += x.data()[i];
  Tensor<T> out = Tensor<T>::scalar(s);
  finish_op(
      out,
      [x, out]() mutable {
        if (!x.requires_grad()) return;
        const T g = out.grad_data()[0];
        T* dx = x.grad_data();
        for (std::size_t i = 0; i < x.numel(); ++i) dx[i] += g;
      },
      x);
  return out;
}

// Negative log-likelihood of targets under column-wise log-probs:
//   loss = -(1/norm) * sum_i mask[i] * logp[targets[i], i].
// `norm` is a constant (sentence count for seq2seq training).
template <typename T>
Tensor<T> masked_nll(const Tensor<T>& logp, const std::vector<int>& targets,
                     const std::vector<T>& mask, T norm) {
  const std::size_t v = logp.rows(), n = logp.cols();
  require_shape(targets.size() == n && mask.size() == n, "masked_nll",
                "targets/mask length does not match " +
                    std::to_string(n) + " columns");
  require_shape(norm > T(0), "masked_nll", "normalizer must be positive");
  for (int t : targets)
    require_shape(t >= 0 && static_cast<std::size_t>(t) < v, "masked_nll",
                  "target id " + std::to_string(t) +
                      " outside vocabulary of size " + std::to_string(v));
  T s = T(0);
  for (std::size_t i = 0; i < n; ++i)
    s -= mask[i] * logp.data()[targets[i] * n + i];
  Tensor<T> out = Tensor<T>::scalar(s / norm);
  finish_op(
      out,
      [logp, out, targets, mask, norm, n]() mutable {
        if (!logp.requires_grad()) return;
        const T g = out.grad_data()[0] / norm;
        T* d = logp.grad_data();
        for (std::size_t i = 0; i < n; ++i)
          d[targets[i] * n + i] -= g * mask[i];
      },
      logp);
  return out;
}

// ---------------------------------------------------------------------------
// Non-differentiable helpers.

template <typename T>
std::vector<int> argmax_cols(const Tensor<T>& x) {
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<int> out(c, 0);
  for (std::size_t j = 0; j < c; ++j) {
    T best = x.data()[j];
    for (std::size_t i = 1; i < r; ++i)
      if (x.data()[i * c + j] > best) {
        best = x.data()[i * c + j];
        out[j] = static_cast<int>(i);
      }
  }
  return out;
}

}  // namespace charnmt
