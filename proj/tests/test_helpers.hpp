// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared oracles and fixtures for the test suite.  Everything here is
// written independently of the library internals it checks: the matrix
// product is the schoolbook triple loop, reductions go through a fixed
// random projection so every output element gets a distinct gradient.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "charnmt/ops.hpp"
#include "charnmt/rng.hpp"
#include "charnmt/tensor.hpp"

namespace testutil {

// C = A (n x k) times B (k x m), row-major, no library code involved.
inline std::vector<double> oracle_matmul(const std::vector<double>& a,
                                         std::size_t n, std::size_t k,
                                         const std::vector<double>& b,
                                         std::size_t m) {
  std::vector<double> c(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t l = 0; l < k; ++l)
        c[i * m + j] += a[i * k + l] * b[l * m + j];
  return c;
}

template <typename T>
charnmt::Tensor<T> random_tensor(charnmt::Shape shape, charnmt::Rng& rng,
                                 double lo, double hi,
                                 bool requires_grad = true) {
  charnmt::Tensor<T> t =
      charnmt::Tensor<T>::zeros(std::move(shape), requires_grad);
  for (T& v : t.values()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Scalar loss sum(y .* w) with w a seeded random constant, so d(loss)/dy
// is a full-rank pattern rather than all ones.  The weights depend only
// on the seed and the shape, so re-evaluating the same loss expression
// (as the finite-difference sweep does) sees identical weights.
template <typename T>
charnmt::Tensor<T> project(const charnmt::Tensor<T>& y, std::uint64_t seed) {
  charnmt::Rng rng(seed);
  charnmt::Tensor<T> w = charnmt::Tensor<T>::zeros(y.shape());
  for (T& v : w.values()) v = static_cast<T>(rng.uniform(-1.0, 1.0));
  return charnmt::sum_all(charnmt::mul(y, w));
}

// Values all distinct with pairwise gaps >= 0.05, shuffled, so kinked
// ops (maxpool, relu) stay away from ties within a +-1e-4 sweep.
template <typename T>
charnmt::Tensor<T> well_separated(charnmt::Shape shape, charnmt::Rng& rng,
                                  bool requires_grad = true) {
  charnmt::Tensor<T> t =
      charnmt::Tensor<T>::zeros(std::move(shape), requires_grad);
  const std::size_t n = t.numel();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  // Values are +-0.05, +-0.10, ...: every pair is at least 0.05 apart and
  // every value is at least 0.05 from zero, so both kinds of kink (relu at
  // zero, pooling ties between entries) keep the same active branch across
  // the whole finite-difference sweep.
  for (std::size_t i = 0; i < n; ++i) {
    const double magnitude = 0.05 * static_cast<double>(i / 2 + 1);
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    t.values()[order[i]] = static_cast<T>(sign * magnitude);
  }
  return t;
}

// Unique scratch directory for tests that need real files.
class TempDir {
public:
  explicit TempDir(const std::string& stem) {
    base_ = std::filesystem::temp_directory_path() /
            (stem + "-" + std::to_string(counter_++));
    std::filesystem::remove_all(base_);
    std::filesystem::create_directories(base_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(base_, ec);
  }
  std::string path(const std::string& name) const {
    return (base_ / name).string();
  }
  std::string root() const { return base_.string(); }

private:
  static inline int counter_ = 0;
  std::filesystem::path base_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  os << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::string s((std::istreambuf_iterator<char>(is)),
                std::istreambuf_iterator<char>());
  return s;
}

}  // namespace testutil
