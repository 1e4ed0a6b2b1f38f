// Moment generating functions, functional inverses, S-transforms, and the
// depth-L composed-spectrum solver (continuation and formal-series routes).

#include "djs/stransform.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <sstream>

#include "djs/errors.hpp"
#include "series.hpp"

namespace djs {

namespace {

std::string complex_to_string(std::complex<double> z) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.6g%+.6gi", z.real(), z.imag());
  return buf;
}

// m(z) and m'(z) for real z strictly left of 1/lambda_max; no pole guard
// needed on that branch.
double real_mgf(const SpectralMeasure& mu, double z) {
  double acc = 0.0;
  for (const Atom& a : mu.atoms()) {
    if (a.location == 0.0) continue;
    acc += a.weight * a.location * z / (1.0 - a.location * z);
  }
  return acc;
}

double real_mgf_derivative(const SpectralMeasure& mu, double z) {
  double acc = 0.0;
  for (const Atom& a : mu.atoms()) {
    if (a.location == 0.0) continue;
    const double d = 1.0 - a.location * z;
    acc += a.weight * a.location / (d * d);
  }
  return acc;
}

double hankel_minor_det(const std::vector<double>& m, int offset, int size) {
  // m[i] = i-th moment with m[0] = 1; entry (i, j) = m[i + j + offset].
  if (size == 1) return m[static_cast<std::size_t>(offset)];
  if (size == 2) {
    const auto e = [&](int i, int j) {
      return m[static_cast<std::size_t>(i + j + offset)];
    };
    return e(0, 0) * e(1, 1) - e(0, 1) * e(1, 0);
  }
  const auto e = [&](int i, int j) {
    return m[static_cast<std::size_t>(i + j + offset)];
  };
  return e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1)) -
         e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0)) +
         e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0));
}

bool hankel_positive(const std::vector<double>& moments) {
  // moments[k-1] = k-th moment. Checks leading principal minors of the
  // Hankel matrices [m_{i+j}] and [m_{i+j+1}] up to 3x3, as data allows.
  std::vector<double> m;
  m.push_back(1.0);
  m.insert(m.end(), moments.begin(), moments.end());
  double scale = 1.0;
  for (double v : m) scale = std::max(scale, std::abs(v));
  for (int offset = 0; offset <= 1; ++offset) {
    for (int size = 1; size <= 3; ++size) {
      const int highest = offset + 2 * (size - 1);
      if (highest >= static_cast<int>(m.size())) break;
      const double det = hankel_minor_det(m, offset, size);
      const double bound = std::pow(scale, size);
      if (det < -1e-9 * bound) return false;
    }
  }
  return true;
}

}  // namespace

MomentSeries moments_of(const SpectralMeasure& mu, std::size_t count,
                        const std::string& source) {
  if (count == 0) throw ConfigError("moments_of: count must be positive");
  MomentSeries series;
  series.source = source;
  series.coefficients.resize(count);
  for (std::size_t k = 1; k <= count; ++k)
    series.coefficients[k - 1] = moment(mu, k);
  series.hankel_psd = hankel_positive(series.coefficients);
  return series;
}

std::complex<double> moment_gen(const SpectralMeasure& mu,
                                std::complex<double> z) {
  std::complex<double> acc = 0.0;
  for (const Atom& a : mu.atoms()) {
    if (a.location == 0.0) continue;
    const std::complex<double> lz = a.location * z;
    const std::complex<double> denom = 1.0 - lz;
    if (std::abs(denom) < 1e-12 * std::max(1.0, std::abs(lz)))
      throw ConfigError("moment_gen: z within 1e-12 of pole 1/" +
                        format_double(a.location));
    acc += a.weight * lz / denom;
  }
  return acc;
}

double functional_inverse(const SpectralMeasure& mu, double m_value,
                          double tol) {
  if (!(tol > 0.0)) throw ConfigError("functional_inverse: tol must be > 0");
  if (!std::isfinite(m_value))
    throw ConfigError("functional_inverse: target must be finite");
  const double w0 = mu.origin_mass();
  const double positive_mass = 1.0 - w0;
  if (mu.max_location() <= 0.0) {
    if (m_value == 0.0) return 0.0;
    throw ConfigError(
        "functional_inverse: measure has no positive mass, image is {0}");
  }
  if (m_value == 0.0) return 0.0;
  if (m_value <= -positive_mass)
    throw ConfigError("functional_inverse: target " + format_double(m_value) +
                      " outside attainable range (" +
                      format_double(-positive_mass) + ", inf)");

  const double z_sup = 1.0 / mu.max_location();
  double lo = 0.0, hi = 0.0;  // bracket with m(lo) < target < m(hi)
  if (m_value > 0.0) {
    lo = 0.0;
    double frac = 0.5;
    for (int j = 0; j < 500; ++j) {
      hi = z_sup * (1.0 - frac);
      if (real_mgf(mu, hi) >= m_value) break;
      lo = hi;
      frac *= 0.5;
      if (j == 499)
        throw NumericalError("functional_inverse",
                             "bracketing failed near the pole");
    }
  } else {
    hi = 0.0;
    double mag = 1.0;
    bool found = false;
    for (int j = 0; j < 1020; ++j) {
      lo = -mag;
      if (real_mgf(mu, lo) <= m_value) {
        found = true;
        break;
      }
      hi = lo;
      mag *= 2.0;
    }
    if (!found)
      throw ConfigError("functional_inverse: target " +
                        format_double(m_value) +
                        " too close to the range edge " +
                        format_double(-positive_mass));
  }

  double z = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double f = real_mgf(mu, z) - m_value;
    if (std::abs(f) <= tol * std::max(1.0, std::abs(m_value))) return z;
    if (f > 0.0)
      hi = z;
    else
      lo = z;
    const double df = real_mgf_derivative(mu, z);
    double z_next = df > 0.0 ? z - f / df : z;
    if (!(z_next > lo && z_next < hi)) z_next = 0.5 * (lo + hi);
    if (hi - lo < 4.0 * std::numeric_limits<double>::epsilon() *
                          (std::abs(lo) + std::abs(hi)) +
                      1e-300)
      return z_next;
    z = z_next;
  }
  return z;
}

double s_transform(const SpectralMeasure& mu, double m_value) {
  if (std::abs(m_value) < 1e-300)
    throw ConfigError("s_transform: m must be nonzero");
  const double z = functional_inverse(mu, m_value);
  return (1.0 + m_value) / m_value * z;
}

ProductLawReport check_product_law(const SpectralMeasure& nu_k,
                                   const SpectralMeasure& prev,
                                   const SpectralMeasure& next,
                                   const std::vector<double>& m_points) {
  if (m_points.empty())
    throw ConfigError("check_product_law: need at least one probe point");
  ProductLawReport report;
  report.m_points = m_points;
  for (double m : m_points) {
    const double lhs = s_transform(next, m);
    const double rhs = s_transform(nu_k, m) * s_transform(prev, m) / (1.0 + m);
    report.lhs.push_back(lhs);
    report.rhs.push_back(rhs);
    const double res = std::abs(lhs - rhs);
    report.residuals.push_back(res);
    report.max_residual = std::max(report.max_residual, res);
  }
  return report;
}

std::string to_json_string(const ProductLawReport& report) {
  std::ostringstream out;
  const auto array = [&out](const std::vector<double>& v) {
    out << "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out << ",";
      out << format_double(v[i]);
    }
    out << "]";
  };
  out << "{\"m_points\":";
  array(report.m_points);
  out << ",\"lhs\":";
  array(report.lhs);
  out << ",\"rhs\":";
  array(report.rhs);
  out << ",\"residuals\":";
  array(report.residuals);
  out << ",\"max_residual\":" << format_double(report.max_residual) << "}";
  return out.str();
}

namespace {

// m_K evaluated at complex w, with a division guard.
std::complex<double> mgf_at(const SpectralMeasure& mu,
                            std::complex<double> w) {
  std::complex<double> acc = 0.0;
  for (const Atom& a : mu.atoms()) {
    if (a.location == 0.0) continue;
    const std::complex<double> denom = 1.0 - a.location * w;
    if (std::abs(denom) < 1e-13)
      throw NumericalError("solve_deep_mgf",
                           "division guard at atom lambda = " +
                               format_double(a.location));
    acc += a.weight * a.location * w / denom;
  }
  return acc;
}

// L-th root of p closest to the reference value.
std::complex<double> nearest_root(std::complex<double> p, std::size_t order,
                                  std::complex<double> reference) {
  const std::complex<double> principal =
      std::pow(p, 1.0 / static_cast<double>(order));
  std::complex<double> best = principal;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < order; ++k) {
    const double angle =
        2.0 * M_PI * static_cast<double>(k) / static_cast<double>(order);
    const std::complex<double> cand =
        principal * std::polar(1.0, angle);
    const double dist = std::abs(cand - reference);
    if (dist < best_dist) {
      best_dist = dist;
      best = cand;
    }
  }
  return best;
}

struct DeepState {
  std::complex<double> m;
  std::complex<double> w;
};

// One damped fixed-point solve of m = m_K(w), w^L = z (1+m) m^(L-1), using
// w_ref to keep root selection on a fixed branch.
DeepState solve_deep_at(const SpectralMeasure& nu_k, std::size_t layers,
                        std::complex<double> z, std::complex<double> m_init,
                        std::complex<double> w_ref, double tol) {
  std::complex<double> m = m_init;
  std::complex<double> w = w_ref;
  double damping = 0.5;
  double prev_residual = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 4000; ++iter) {
    std::complex<double> p = z * (1.0 + m);
    for (std::size_t j = 0; j + 1 < layers; ++j) p *= m;
    w = nearest_root(p, layers, w);
    const std::complex<double> m_next = mgf_at(nu_k, w);
    const double residual = std::abs(m_next - m);
    if (residual < tol * std::max(1.0, std::abs(m))) {
      return {m_next, w};
    }
    if (residual > prev_residual * 1.0000001 && iter > 5)
      damping = std::max(damping * 0.5, 1.0 / 64.0);
    prev_residual = residual;
    m = (1.0 - damping) * m + damping * m_next;
  }
  throw NumericalError("solve_deep_mgf", "no convergence at z = " +
                                             complex_to_string(z));
}

}  // namespace

std::complex<double> solve_deep_mgf(const SpectralMeasure& nu_k,
                                    std::size_t layers,
                                    std::complex<double> z, double tol) {
  if (layers == 0) throw ConfigError("solve_deep_mgf: layers must be >= 1");
  if (!(tol > 0.0)) throw ConfigError("solve_deep_mgf: tol must be > 0");
  const double kappa1 = moment(nu_k, 1);
  if (!(kappa1 > 0.0))
    throw ConfigError("solve_deep_mgf: factor law needs positive mean");
  if (std::abs(z) == 0.0) return 0.0;

  const double dL = static_cast<double>(layers);
  const double lam_max = nu_k.max_location();
  // Conservative support-edge bound for the composed spectrum; the seed
  // point sits well inside the series radius 1/edge.
  const double edge_bound =
      std::pow(lam_max, dL) * (dL + 1.0) * std::exp(1.0) * 1.2;
  const double s0 = std::min(0.2 / edge_bound, std::abs(z));

  const double ratio = std::abs(z) / s0;
  const int steps =
      ratio <= 1.0 ? 0
                   : std::max(1, static_cast<int>(
                                     std::ceil(std::log(ratio) /
                                               std::log(1.3))));

  // Seed from the leading series term at the start of the ray.
  std::complex<double> z_cur =
      z * (s0 / std::abs(z));
  std::complex<double> m = std::pow(kappa1, dL) * z_cur;
  std::complex<double> w = std::pow(kappa1, dL - 1.0) * z_cur;
  DeepState state = solve_deep_at(nu_k, layers, z_cur, m, w, tol);

  for (int j = 1; j <= steps; ++j) {
    const double t = static_cast<double>(j) / static_cast<double>(steps);
    const std::complex<double> z_next = z * std::pow(s0 / std::abs(z), 1.0 - t);
    const DeepState next =
        solve_deep_at(nu_k, layers, z_next, state.m, state.w, tol);
    const double jump = std::abs(next.m - state.m);
    if (jump > 0.75 * std::abs(state.m) + 0.05)
      throw NumericalError("solve_deep_mgf",
                           "branch ambiguity near z = " +
                               complex_to_string(z_next));
    state = next;
  }
  return state.m;
}

std::vector<double> deep_moment_series(const SpectralMeasure& nu_k,
                                       std::size_t layers,
                                       std::size_t count) {
  if (layers == 0)
    throw ConfigError("deep_moment_series: layers must be >= 1");
  if (count == 0) throw ConfigError("deep_moment_series: count must be >= 1");
  const std::vector<double> kappa =
      moments_of(nu_k, count, "factor").coefficients;
  if (!(kappa[0] > 0.0))
    throw ConfigError("deep_moment_series: factor law needs positive mean");

  const int order = static_cast<int>(count);
  const double dL = static_cast<double>(layers);
  const double a1 = std::pow(kappa[0], dL);
  const double c0 = std::pow(kappa[0], dL - 1.0);

  detail::Coeffs a = detail::series_zero(order);
  a[1] = a1;
  for (int sweep = 0; sweep < 500; ++sweep) {
    // m_hat = a1 z (1 + r(z)), r[j] = a[j+1] / a1.
    detail::Coeffs r = detail::series_zero(order);
    for (int j = 1; j < order; ++j)
      r[static_cast<std::size_t>(j)] = a[static_cast<std::size_t>(j + 1)] / a1;
    // B = (1 + m_hat) (1 + r)^(L-1) = 1 + b.
    detail::Coeffs one_plus_m = a;
    one_plus_m[0] = 1.0;
    detail::Coeffs b = detail::series_mul(
        one_plus_m, detail::series_pow1p(r, dL - 1.0, order), order);
    b[0] = 0.0;
    // w = c0 z (1 + b)^(1/L), shifted by one power of z.
    const detail::Coeffs root = detail::series_pow1p(b, 1.0 / dL, order);
    detail::Coeffs w = detail::series_zero(order);
    for (int j = 1; j <= order; ++j)
      w[static_cast<std::size_t>(j)] =
          c0 * root[static_cast<std::size_t>(j - 1)];
    // m_new = sum_j kappa_j w^j by Horner.
    detail::Coeffs acc = detail::series_zero(order);
    acc[0] = kappa[count - 1];
    for (int j = static_cast<int>(count) - 1; j >= 1; --j) {
      acc = detail::series_mul(acc, w, order);
      acc[0] += kappa[static_cast<std::size_t>(j - 1)];
    }
    const detail::Coeffs m_new = detail::series_mul(acc, w, order);

    double delta = 0.0, scale = 1.0;
    for (int j = 0; j <= order; ++j) {
      delta = std::max(delta, std::abs(m_new[static_cast<std::size_t>(j)] -
                                       a[static_cast<std::size_t>(j)]));
      scale = std::max(scale, std::abs(m_new[static_cast<std::size_t>(j)]));
    }
    a = m_new;
    a[0] = 0.0;
    if (delta < 1e-13 * scale) {
      std::vector<double> out(count);
      for (std::size_t k = 1; k <= count; ++k) out[k - 1] = a[k];
      return out;
    }
  }
  throw NumericalError("deep_moment_series", "series sweep did not settle");
}

}  // namespace djs
