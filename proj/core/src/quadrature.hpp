#pragma once
// Gaussian quadrature rules built by Golub-Welsch (symmetric tridiagonal
// eigensolve of the Jacobi matrix), cached per order. Internal to the core
// library.
//
//   gauss_hermite_normal(n): sum w_i f(x_i) ~ E f(Z), Z standard normal.
//   gauss_legendre01(n):     sum w_i f(x_i) ~ integral of f over [0,1].

#include <vector>

namespace djs::detail {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

const QuadratureRule& gauss_hermite_normal(int order);
const QuadratureRule& gauss_legendre01(int order);

}  // namespace djs::detail
