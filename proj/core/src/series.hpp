#pragma once
// Truncated formal power series over double. A series of order K is a
// coefficient vector c[0..K] representing sum_i c[i] z^i; every operation
// truncates at order K. Used to extract moment sequences from functional
// equations without numerical continuation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace djs::detail {

using Coeffs = std::vector<double>;

inline Coeffs series_zero(int order) {
  return Coeffs(static_cast<std::size_t>(order) + 1, 0.0);
}

inline Coeffs series_mul(const Coeffs& a, const Coeffs& b, int order) {
  Coeffs out = series_zero(order);
  const int na = static_cast<int>(a.size());
  for (int i = 0; i < na && i <= order; ++i) {
    if (a[static_cast<std::size_t>(i)] == 0.0) continue;
    const int nb = std::min<int>(static_cast<int>(b.size()) - 1, order - i);
    for (int j = 0; j <= nb; ++j) {
      out[static_cast<std::size_t>(i + j)] +=
          a[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(j)];
    }
  }
  return out;
}

// log(1 + u) for a series u with u[0] == 0.
inline Coeffs series_log1p(const Coeffs& u, int order) {
  if (!u.empty() && u[0] != 0.0)
    throw std::invalid_argument("series_log1p needs zero constant term");
  Coeffs out = series_zero(order);
  for (int n = 1; n <= order; ++n) {
    double acc = n < static_cast<int>(u.size())
                     ? n * u[static_cast<std::size_t>(n)]
                     : 0.0;
    for (int k = 1; k < n; ++k) {
      const int j = n - k;
      if (j < static_cast<int>(u.size()))
        acc -= k * out[static_cast<std::size_t>(k)] *
               u[static_cast<std::size_t>(j)];
    }
    out[static_cast<std::size_t>(n)] = acc / n;
  }
  return out;
}

// exp(v) for a series v with v[0] == 0.
inline Coeffs series_exp(const Coeffs& v, int order) {
  if (!v.empty() && v[0] != 0.0)
    throw std::invalid_argument("series_exp needs zero constant term");
  Coeffs out = series_zero(order);
  out[0] = 1.0;
  for (int n = 1; n <= order; ++n) {
    double acc = 0.0;
    for (int k = 1; k <= n; ++k) {
      if (k < static_cast<int>(v.size()))
        acc += k * v[static_cast<std::size_t>(k)] *
               out[static_cast<std::size_t>(n - k)];
    }
    out[static_cast<std::size_t>(n)] = acc / n;
  }
  return out;
}

// (1 + u)^beta for a series u with u[0] == 0 and real exponent beta.
inline Coeffs series_pow1p(const Coeffs& u, double beta, int order) {
  return series_exp(
      [&] {
        Coeffs l = series_log1p(u, order);
        for (double& c : l) c *= beta;
        return l;
      }(),
      order);
}

}  // namespace djs::detail
