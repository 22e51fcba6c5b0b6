#pragma once

// Data-parallel inner loops. Each kernel has a serial reference version and an
// OpenMP version; both reduce in canonical order and return identical bits.

#include <span>
#include <vector>

#include "sense/model.hpp"
#include "sense/tensor.hpp"

namespace sense::kernels {

struct LossItem {
  const Tensor* frames = nullptr;
  const Vector* teacher = nullptr;
};

struct BatchGradient {
  std::vector<double> losses;  // per item, input order
  double mean_loss = 0.0;
  ParamGrads grads;            // mean over items
};

BatchGradient batch_gradient_serial(const ModelParams& params, std::span<const LossItem> items);
BatchGradient batch_gradient_parallel(const ModelParams& params, std::span<const LossItem> items);

std::vector<Vector> embed_serial(const ModelParams& params, std::span<const Tensor> frames);
std::vector<Vector> embed_parallel(const ModelParams& params, std::span<const Tensor> frames);

/// Row-major n x dim block of vectors with precomputed norms.
struct VectorBlock {
  std::size_t dim = 0;
  std::vector<double> data;
  std::vector<double> norms;

  std::size_t size() const noexcept { return norms.size(); }
  std::span<const double> row(std::size_t i) const noexcept { return {data.data() + i * dim, dim}; }
};

VectorBlock make_block(std::size_t dim, const std::vector<Vector>& vectors);

/// Cosine of `query` against every row; zero-norm rows score -infinity.
/// The caller guarantees a nonzero query of matching dimension.
std::vector<double> cosine_scores_serial(std::span<const double> query, const VectorBlock& block);
std::vector<double> cosine_scores_parallel(std::span<const double> query, const VectorBlock& block);

}  // namespace sense::kernels
