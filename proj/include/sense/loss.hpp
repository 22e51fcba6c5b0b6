#pragma once

#include <span>

#include "sense/tensor.hpp"

namespace sense {

/// (u.v)/(|u||v|) clamped to [-1, 1]. DomainError on a zero-norm input,
/// ShapeError on a length mismatch.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// 1 - cosine_similarity(s, t), in [0, 2].
double cosine_loss(std::span<const double> s, std::span<const double> t);

/// dL/ds = -( t/(|s||t|) - (s.t) s/(|s|^3 |t|) ).
Vector loss_grad(std::span<const double> s, std::span<const double> t);

}  // namespace sense
