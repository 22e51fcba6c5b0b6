#include "sense/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "sense/error.hpp"
#include "sense/loss.hpp"

namespace sense::kernels {

namespace {

struct ItemResult {
  double loss = 0.0;
  ParamGrads grads;
};

ItemResult item_gradient(const ModelParams& params, const LossItem& item) {
  const ForwardResult f = forward(params, *item.frames);
  ItemResult r;
  // A non-finite or all-zero embedding has no defined cosine; report a NaN
  // loss and let the caller abort with the batch in hand.
  const double n2 = dot(f.embedding, f.embedding);
  if (!std::isfinite(n2) || n2 == 0.0) {
    r.loss = std::numeric_limits<double>::quiet_NaN();
    r.grads = ModelParams::zeros(params.dims);
    return r;
  }
  r.loss = cosine_loss(f.embedding, *item.teacher);
  r.grads = backward(params, *item.frames, f, loss_grad(f.embedding, *item.teacher));
  return r;
}

BatchGradient reduce(const ModelParams& params, std::vector<ItemResult>& results) {
  BatchGradient out;
  out.grads = ModelParams::zeros(params.dims);
  const double scale = 1.0 / static_cast<double>(results.size());
  double total = 0.0;
  for (auto& r : results) {
    out.losses.push_back(r.loss);
    total += r.loss;
    accumulate(out.grads, r.grads, scale);
  }
  out.mean_loss = total * scale;
  return out;
}

}  // namespace

BatchGradient batch_gradient_serial(const ModelParams& params, std::span<const LossItem> items) {
  if (items.empty()) throw DomainError("batch_gradient: empty batch");
  std::vector<ItemResult> results;
  results.reserve(items.size());
  for (const auto& item : items) results.push_back(item_gradient(params, item));
  return reduce(params, results);
}

BatchGradient batch_gradient_parallel(const ModelParams& params, std::span<const LossItem> items) {
  if (items.empty()) throw DomainError("batch_gradient: empty batch");
  std::vector<ItemResult> results(items.size());
  const auto n = static_cast<long>(items.size());
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic, 1)
  for (long i = 0; i < n; ++i) {
    try {
      results[static_cast<std::size_t>(i)] = item_gradient(params, items[static_cast<std::size_t>(i)]);
    } catch (...) {
#pragma omp critical(sense_kernel_error)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return reduce(params, results);
}

std::vector<Vector> embed_serial(const ModelParams& params, std::span<const Tensor> frames) {
  std::vector<Vector> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(forward(params, f).embedding);
  return out;
}

std::vector<Vector> embed_parallel(const ModelParams& params, std::span<const Tensor> frames) {
  std::vector<Vector> out(frames.size());
  const auto n = static_cast<long>(frames.size());
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic, 4)
  for (long i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = forward(params, frames[static_cast<std::size_t>(i)]).embedding;
    } catch (...) {
#pragma omp critical(sense_kernel_error)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return out;
}

VectorBlock make_block(std::size_t dim, const std::vector<Vector>& vectors) {
  VectorBlock b;
  b.dim = dim;
  b.data.reserve(dim * vectors.size());
  for (const auto& v : vectors) {
    if (v.size() != dim) throw ShapeError("make_block: vector dimension mismatch");
    b.data.insert(b.data.end(), v.begin(), v.end());
    b.norms.push_back(std::sqrt(dot(v, v)));
  }
  return b;
}

namespace {

inline double score_row(std::span<const double> q, double qn, const VectorBlock& b, std::size_t i) {
  if (!(b.norms[i] > 0.0)) return -std::numeric_limits<double>::infinity();
  const double c = dot(q, b.row(i)) / (qn * b.norms[i]);
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace

std::vector<double> cosine_scores_serial(std::span<const double> query, const VectorBlock& block) {
  const double qn = std::sqrt(dot(query, query));
  std::vector<double> out(block.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = score_row(query, qn, block, i);
  return out;
}

std::vector<double> cosine_scores_parallel(std::span<const double> query, const VectorBlock& block) {
  const double qn = std::sqrt(dot(query, query));
  std::vector<double> out(block.size());
  const auto n = static_cast<long>(out.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = score_row(query, qn, block, static_cast<std::size_t>(i));
  return out;
}

}  // namespace sense::kernels
