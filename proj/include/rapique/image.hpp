#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "rapique/error.hpp"

namespace rapique {

// Dense row-major 2D array. Indexing is (row, col), i.e. (i, j).
template <typename T>
class Plane {
 public:
  Plane() = default;
  Plane(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
    assert(rows >= 0 && cols >= 0);
  }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int i, int j) noexcept { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  const T& operator()(int i, int j) const noexcept {
    return data_[static_cast<std::size_t>(i) * cols_ + j];
  }

  T* row(int i) noexcept { return data_.data() + static_cast<std::size_t>(i) * cols_; }
  const T* row(int i) const noexcept { return data_.data() + static_cast<std::size_t>(i) * cols_; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  bool same_shape(const Plane& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Plane&, const Plane&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using Image = Plane<double>;

// Symmetric (half-sample) reflection: ... c b a | a b c ... | c b a ...
inline int mirror_index(int idx, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * n;
  idx %= period;
  if (idx < 0) idx += period;
  return idx < n ? idx : period - 1 - idx;
}

inline Image transpose(const Image& in) {
  Image out(in.cols(), in.rows());
  for (int i = 0; i < in.rows(); ++i)
    for (int j = 0; j < in.cols(); ++j) out(j, i) = in(i, j);
  return out;
}

inline bool all_finite(const Image& img) {
  return std::all_of(img.values().begin(), img.values().end(),
                     [](double v) { return std::isfinite(v); });
}

inline double mean_of(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return v.empty() ? 0.0 : sum / static_cast<double>(v.size());
}

}  // namespace rapique
