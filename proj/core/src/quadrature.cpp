#include "quadrature.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <mutex>

#include "djs/errors.hpp"

namespace djs::detail {
namespace {

// Nodes are the eigenvalues of the Jacobi matrix; the weight of node i is
// mu0 * (first eigenvector component)^2.
QuadratureRule golub_welsch(const std::vector<double>& offdiag, double mu0) {
  const int n = static_cast<int>(offdiag.size()) + 1;
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(n - 1);
  for (int i = 0; i < n - 1; ++i) sub[i] = offdiag[static_cast<std::size_t>(i)];

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("quadrature", "tridiagonal eigensolve failed");
  }

  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    rule.nodes[static_cast<std::size_t>(i)] = solver.eigenvalues()[i];
    const double v0 = solver.eigenvectors()(0, i);
    rule.weights[static_cast<std::size_t>(i)] = mu0 * v0 * v0;
  }
  return rule;
}

QuadratureRule make_hermite_normal(int order) {
  // Jacobi matrix for the weight exp(-x^2/2)/sqrt(2*pi): zero diagonal,
  // off-diagonal sqrt(k); mu0 = 1 after normalization.
  std::vector<double> offdiag(static_cast<std::size_t>(order - 1));
  for (int k = 1; k < order; ++k) {
    offdiag[static_cast<std::size_t>(k - 1)] = std::sqrt(static_cast<double>(k));
  }
  return golub_welsch(offdiag, 1.0);
}

QuadratureRule make_legendre01(int order) {
  // Legendre on [-1,1]: off-diagonal k/sqrt(4k^2-1), mu0 = 2; then map to
  // [0,1].
  std::vector<double> offdiag(static_cast<std::size_t>(order - 1));
  for (int k = 1; k < order; ++k) {
    offdiag[static_cast<std::size_t>(k - 1)] =
        k / std::sqrt(4.0 * k * k - 1.0);
  }
  QuadratureRule rule = golub_welsch(offdiag, 2.0);
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    rule.nodes[i] = 0.5 * (rule.nodes[i] + 1.0);
    rule.weights[i] *= 0.5;
  }
  return rule;
}

template <typename Maker>
const QuadratureRule& cached(std::map<int, QuadratureRule>& cache,
                             std::mutex& mutex, int order, Maker make) {
  if (order < 2) throw ConfigError("quadrature order must be at least 2");
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, make(order)).first;
  return it->second;
}

}  // namespace

const QuadratureRule& gauss_hermite_normal(int order) {
  static std::map<int, QuadratureRule> cache;
  static std::mutex mutex;
  return cached(cache, mutex, order, make_hermite_normal);
}

const QuadratureRule& gauss_legendre01(int order) {
  static std::map<int, QuadratureRule> cache;
  static std::mutex mutex;
  return cached(cache, mutex, order, make_legendre01);
}

}  // namespace djs::detail
