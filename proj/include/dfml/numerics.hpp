#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace dfml {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Pairwise (cascade) summation in index order; the result depends only on
/// the values, not on how they were produced.
inline double pairwise_sum(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

inline double pairwise_sum(const std::vector<double>& values) {
  return pairwise_sum(std::span<const double>(values.data(), values.size()));
}

/// Runs body(i) for i in [0, n) on up to `workers` threads (0 = hardware
/// concurrency). body must only write state owned by index i.
template <typename Body>
void parallel_for(std::size_t n, Body&& body, unsigned workers = 0) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) body(i);
    });
}

}  // namespace dfml
