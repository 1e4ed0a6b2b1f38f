#pragma once
// Moment-side analysis of spectral measures: moment generating functions,
// their functional inverses, S-transforms, the multiplicative law they
// satisfy under the layer composition, and a direct series/continuation
// solver for the depth-L composed spectrum.

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "djs/measure.hpp"

namespace djs {

// Moment sequence m_1..m_K of a measure, with a positivity diagnostic on
// leading Hankel minors (a necessary condition for a valid moment sequence).
struct MomentSeries {
  std::vector<double> coefficients;  // coefficients[k-1] = k-th moment
  std::string source;
  bool hankel_psd = false;
};

MomentSeries moments_of(const SpectralMeasure& mu, std::size_t count,
                        const std::string& source = "");

// m(z) = sum_k m_k z^k evaluated as sum_atoms w * lambda z / (1 - lambda z).
// Throws ConfigError when z is within 1e-12 of a pole 1/lambda.
std::complex<double> moment_gen(const SpectralMeasure& mu,
                                std::complex<double> z);

// Inverse of the real monotone branch of m on (-inf, 1/lambda_max): returns
// z with moment_gen(mu, z) == m_value. The attainable range is
// (-(1 - mu({0})), +inf); values outside it raise ConfigError.
double functional_inverse(const SpectralMeasure& mu, double m_value,
                          double tol = 1e-12);

// S(m) = (1 + m) / m * functional_inverse(mu, m), for m in the attainable
// range excluding 0.
double s_transform(const SpectralMeasure& mu, double m_value);

// Residuals of S_next(m) = S_K(m) * S_prev(m) / (1 + m) over a probe set of
// m values, reported pointwise.
struct ProductLawReport {
  std::vector<double> m_points;
  std::vector<double> lhs;  // S_next(m)
  std::vector<double> rhs;  // S_K(m) * S_prev(m) / (1 + m)
  std::vector<double> residuals;
  double max_residual = 0.0;
};

ProductLawReport check_product_law(const SpectralMeasure& nu_k,
                                   const SpectralMeasure& prev,
                                   const SpectralMeasure& next,
                                   const std::vector<double>& m_points);

std::string to_json_string(const ProductLawReport& report);

// Moment generating function of the depth-L equal-width composed spectrum,
// obtained from m = m_K(w) with w^L = z (1 + m) m^(L-1), solved by damped
// fixed point with geometric continuation in z from a small-|z| seed.
// Throws NumericalError when the continuation detects a branch ambiguity
// or fails to converge.
std::complex<double> solve_deep_mgf(const SpectralMeasure& nu_k,
                                    std::size_t layers,
                                    std::complex<double> z,
                                    double tol = 1e-11);

// First `count` moments of the same composed spectrum, extracted from the
// functional equation as a truncated power series (no continuation).
std::vector<double> deep_moment_series(const SpectralMeasure& nu_k,
                                       std::size_t layers, std::size_t count);

}  // namespace djs
