//====== common.hpp — shared scalar helpers, cutoff blends, small utilities ==
//
// Conventions used across the library:
//   * fields live on Fourier modes k in [-K, K], index i = k + K;
//   * the Japanese bracket is jb(x) = max(1, |x|);
//   * |xi|^alpha is evaluated with a hard guard at xi == 0 (value 0);
//   * all randomness is drawn from std::mt19937_64 with explicit seeds.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace speclab {

using cplx = std::complex<double>;
using Vec  = Eigen::VectorXcd;
using Mat  = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

inline constexpr cplx I{0.0, 1.0};
inline constexpr double PI = 3.141592653589793238462643383279502884;

// Cutoff geometry: chi(xi', xi) = 1 - eta(2|xi'| / (delta0 * jb(xi))).
inline constexpr double DELTA0 = 0.1;

//====== scalar helpers ======================================================

// Japanese bracket <x> = max(1, |x|).
inline double jb(double x) { return std::max(1.0, std::abs(x)); }

// |xi|^alpha with the lattice guard: the value at xi == 0 is defined to be 0.
inline double abs_pow(double xi, double alpha) {
  if (xi == 0.0) return 0.0;
  return std::pow(std::abs(xi), alpha);
}

// d^n/dxi^n |xi|^alpha away from 0 (and 0 at xi == 0, matching the guard).
inline double abs_pow_deriv(double xi, double alpha, int n) {
  if (xi == 0.0) return 0.0;
  double c = 1.0;
  for (int m = 0; m < n; ++m) c *= (alpha - m);
  double v = c * std::pow(std::abs(xi), alpha - n);
  // odd derivatives pick up the sign of xi
  if (n % 2 == 1 && xi < 0.0) v = -v;
  return v;
}

//====== smooth blend and paradifferential cutoff ============================

// eta: smooth monotone blend, eta == 0 for y <= 1, eta == 1 for y >= 2,
// eta(1.5) == 0.5 by symmetry of the two exponential bumps.
inline double eta_blend(double y) {
  if (y <= 1.0) return 0.0;
  if (y >= 2.0) return 1.0;
  const double a = std::exp(-1.0 / (y - 1.0));
  const double b = std::exp(-1.0 / (2.0 - y));
  return a / (a + b);
}

// chi(xi', xi): equals 1 for |xi'| <= delta0/2 * jb(xi), vanishes for
// |xi'| >= delta0 * jb(xi).  xi' is the symbol (x-)frequency, xi the
// quantization frequency.
inline double chi_cutoff(double xi_prime, double xi) {
  return 1.0 - eta_blend(2.0 * std::abs(xi_prime) / (DELTA0 * jb(xi)));
}

// chi_p(max_j, xi): homogeneous-coefficient cutoff; max_j is the largest
// modulus among the coefficient indices.
inline double chi_hom(double max_j, double xi) {
  return 1.0 - eta_blend(2.0 * max_j / (DELTA0 * jb(xi)));
}

// One-sided frequency window eta_R(xi) = eta(xi / R): identically 0 for
// xi <= R, identically 1 for xi >= 2R, monotone nondecreasing in xi.
inline double eta_window(double xi, double R) {
  return eta_blend(xi / R);
}

// Derivative of eta (used by the positive-commutator symbol algebra).
inline double eta_blend_deriv(double y) {
  if (y <= 1.0 || y >= 2.0) return 0.0;
  const double a = std::exp(-1.0 / (y - 1.0));
  const double b = std::exp(-1.0 / (2.0 - y));
  const double ap = a / ((y - 1.0) * (y - 1.0));
  const double bp = -b / ((2.0 - y) * (2.0 - y));
  // d/dy [a/(a+b)] = (ap*b - a*bp)/(a+b)^2
  const double s = a + b;
  return (ap * b - a * bp) / (s * s);
}

//====== least squares line fit ==============================================

// Fit y = slope*x + intercept; returns {slope, intercept}.
inline std::pair<double, double> linear_fit(const std::vector<double>& x,
                                            const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("linear_fit: need >= 2 points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-300)
    throw std::invalid_argument("linear_fit: degenerate abscissae");
  const double slope = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / n;
  return {slope, intercept};
}

//====== deterministic random fields =========================================

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  return std::mt19937_64{seed};
}

// Complex standard normal (unit variance per component pair).
inline cplx randn_cplx(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  const double re = g(rng);
  const double im = g(rng);
  return cplx(re, im) / std::sqrt(2.0);
}

//====== formatting and CSV output ===========================================

// Format a double with 17 significant digits (round-trip safe).
inline std::string fmt17(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// Minimal CSV writer: header row plus rows of doubles, 17 significant digits.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header)
      : out_(path) {
    if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path);
    ncol_ = header.size();
    for (size_t i = 0; i < header.size(); ++i)
      out_ << header[i] << (i + 1 < header.size() ? "," : "\n");
  }

  void row(const std::vector<double>& vals) {
    if (vals.size() != ncol_)
      throw std::invalid_argument("CsvWriter: column count mismatch");
    for (size_t i = 0; i < vals.size(); ++i)
      out_ << fmt17(vals[i]) << (i + 1 < vals.size() ? "," : "\n");
  }

 private:
  std::ofstream out_;
  size_t ncol_ = 0;
};

}  // namespace speclab
