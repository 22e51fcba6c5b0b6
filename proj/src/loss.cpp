#include "sense/loss.hpp"

#include <algorithm>
#include <cmath>

#include "sense/error.hpp"

namespace sense {

namespace {

void check(std::span<const double> u, std::span<const double> v, double nu, double nv) {
  if (u.size() != v.size()) throw ShapeError("cosine: vectors of different dimension");
  if (!(nu > 0.0) || !(nv > 0.0)) throw DomainError("cosine: zero-norm input");
}

}  // namespace

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ShapeError("cosine: vectors of different dimension");
  const double nu = std::sqrt(dot(u, u)), nv = std::sqrt(dot(v, v));
  check(u, v, nu, nv);
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

double cosine_loss(std::span<const double> s, std::span<const double> t) { return 1.0 - cosine_similarity(s, t); }

Vector loss_grad(std::span<const double> s, std::span<const double> t) {
  if (s.size() != t.size()) throw ShapeError("cosine: vectors of different dimension");
  const double ns = std::sqrt(dot(s, s)), nt = std::sqrt(dot(t, t));
  check(s, t, ns, nt);
  const double st = dot(s, t);
  const double a = 1.0 / (ns * nt);
  const double b = st / (ns * ns * ns * nt);
  Vector g(s.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = -(a * t[i] - b * s[i]);
  return g;
}

}  // namespace sense
