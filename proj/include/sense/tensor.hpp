#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sense {

using Vector = std::vector<double>;

/// Dense row-major matrix. A vector parameter is stored as an n x 1 tensor
/// with is_vector set so that it serializes on one line.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool is_vector = false;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  static Tensor vec(std::size_t n) {
    Tensor t(n, 1);
    t.is_vector = true;
    return t;
  }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data[r * cols + c]; }
  double& operator[](std::size_t i) noexcept { return data[i]; }
  double operator[](std::size_t i) const noexcept { return data[i]; }

  std::span<double> row(std::size_t r) noexcept { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data.data() + r * cols, cols};
  }

  std::size_t size() const noexcept { return data.size(); }
  bool same_shape(const Tensor& o) const noexcept { return rows == o.rows && cols == o.cols; }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace sense
