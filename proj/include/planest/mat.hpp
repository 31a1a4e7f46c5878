#pragma once

#include <cstddef>
#include <vector>

#include "planest/errors.hpp"

namespace planest {

// Dense row-major matrix. Row 0..rows-1 are batch entries, columns are
// features. Vectors are (1, n) matrices.
template <class T>
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<T> d;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), d(static_cast<size_t>(r) * c, T(0)) {}

  static Mat zeros(int r, int c) { return Mat(r, c); }

  T& operator()(int r, int c) { return d[static_cast<size_t>(r) * cols + c]; }
  const T& operator()(int r, int c) const {
    return d[static_cast<size_t>(r) * cols + c];
  }

  T* row(int r) { return d.data() + static_cast<size_t>(r) * cols; }
  const T* row(int r) const { return d.data() + static_cast<size_t>(r) * cols; }

  size_t size() const { return d.size(); }
  bool empty() const { return d.empty(); }

  bool same_shape(const Mat& o) const {
    return rows == o.rows && cols == o.cols;
  }

  template <class U>
  Mat<U> cast() const {
    Mat<U> out(rows, cols);
    for (size_t i = 0; i < d.size(); ++i) out.d[i] = static_cast<U>(d[i]);
    return out;
  }

  friend bool operator==(const Mat& a, const Mat& b) {
    return a.rows == b.rows && a.cols == b.cols && a.d == b.d;
  }
};

using MatF = Mat<float>;
using MatD = Mat<double>;

}  // namespace planest
