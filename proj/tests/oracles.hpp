#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "granger/tensor.hpp"

// Reference implementations the production code must agree with, computed by
// structurally different routes (finite differences, naive loops).
namespace oracle {

inline double rel_err(double a, double b) {
  double denom = std::max({std::abs(a), std::abs(b), 1.0});
  return std::abs(a - b) / denom;
}

// Central finite-difference check of d(forward())/d(leaf) for every element
// of every leaf.  forward() must rebuild the graph from the leaves' current
// values under its own Tape, run backward, and return the scalar loss; it is
// invoked 2 * total_elements + 1 times.  Returns the max relative error
// between analytic and numeric gradients.
inline double gradcheck(const std::function<double()>& forward,
                        std::vector<granger::Tensor> leaves,
                        double h = 1e-5) {
  std::vector<std::vector<double>> analytic;
  for (auto& leaf : leaves) leaf.zero_grad();
  forward();
  for (auto& leaf : leaves) {
    auto g = leaf.grad();
    analytic.emplace_back(g.begin(), g.end());
  }
  double max_err = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto data = leaves[li].data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      double save = data[i];
      data[i] = save + h;
      for (auto& leaf : leaves) leaf.zero_grad();
      double up = forward();
      data[i] = save - h;
      for (auto& leaf : leaves) leaf.zero_grad();
      double down = forward();
      data[i] = save;
      double numeric = (up - down) / (2.0 * h);
      max_err = std::max(max_err, rel_err(analytic[li][i], numeric));
    }
  }
  return max_err;
}

// Plain triple-loop matrix product, deliberately in i-j-k order so the
// summation order differs from the production kernel.
inline std::vector<double> naive_matmul(const std::vector<double>& a,
                                        const std::vector<double>& b,
                                        std::size_t m, std::size_t k,
                                        std::size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) s += a[i * k + kk] * b[kk * n + j];
      c[i * n + j] = s;
    }
  return c;
}

}  // namespace oracle
