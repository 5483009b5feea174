#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

#include "geoflow/vec.hpp"

namespace geoflow {

/// Antisymmetric n x n tensor stored as the n(n-1)/2 strictly upper-triangular
/// entries, row-major: (0,1), (0,2), ..., (0,n-1), (1,2), ...
/// Antisymmetry is structural: reads at (k,j) with k > j return the negated
/// (j,k) entry, diagonal reads return 0.
class AntisymMatrix {
 public:
  AntisymMatrix() = default;
  explicit AntisymMatrix(std::size_t n) : n_(n), up_(pair_count(n), 0.0) {}

  static std::size_t pair_count(std::size_t n) { return n * (n - 1) / 2; }

  // packed index of the (j,k) pair, j < k
  static std::size_t pack(std::size_t j, std::size_t k, std::size_t n) {
    assert(j < k && k < n);
    return j * (2 * n - j - 1) / 2 + (k - j - 1);
  }

  std::size_t dim() const { return n_; }
  std::size_t size() const { return up_.size(); }

  double operator()(std::size_t j, std::size_t k) const {
    if (j == k) return 0.0;
    return j < k ? up_[pack(j, k, n_)] : -up_[pack(k, j, n_)];
  }

  void set(std::size_t j, std::size_t k, double v) {
    if (j < k)
      up_[pack(j, k, n_)] = v;
    else
      up_[pack(k, j, n_)] = -v;
  }

  std::span<double> packed() { return up_; }
  std::span<const double> packed() const { return up_; }

  void assign_packed(std::span<const double> p) {
    assert(p.size() == up_.size());
    up_.assign(p.begin(), p.end());
  }

  /// l = x ^ y, i.e. l_jk = x_j y_k - x_k y_j.
  static AntisymMatrix wedge(std::span<const double> x, std::span<const double> y) {
    AntisymMatrix l(x.size());
    std::size_t idx = 0;
    for (std::size_t j = 0; j + 1 < x.size(); ++j)
      for (std::size_t k = j + 1; k < x.size(); ++k) l.up_[idx++] = x[j] * y[k] - x[k] * y[j];
    return l;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> up_;
};

}  // namespace geoflow
