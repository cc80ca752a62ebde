//====== mourre.hpp — escape-function operator, growth functional, data prep =
//
// The escape machinery lives on a frequency window [R, 2R] far above the
// paradifferential cutoff band: A_op quantizes t(x)|xi|^{2s} eta_R(xi)^2 with
// t(x) = -Im(z1 conj(zm1) e^{2ix}), B_op quantizes the effective transport
// symbol (J1 + v(x)) xi, and C_op is the diagonal multiplier |k|^{2s}
// eta_R(k)^2.  The quadratic form <A_op z, z> is the growth functional; its
// time derivative along the effective flow is bounded below through the
// commutator i[A_op, B_op] >= I1 C_op - (small), which the module verifies
// both at operator level (weighted eigenvalue bounds) and at symbol level
// (an exact pointwise-nonnegative decomposition of the Poisson bracket).

#pragma once

#include <string>
#include <vector>

#include "speclab/dynamics.hpp"
#include "speclab/paradiff.hpp"

namespace speclab {

//====== setup ===============================================================

struct MourreSetup {
  double eps = 0.0;
  double theta = 0.0;
  double alpha = 0.5;
  double s = 7.0;
  double R = 0.0;  // eps^{-(3+theta)/(1-alpha)}
  cplx z1{0.0, 0.0};
  cplx zm1{0.0, 0.0};
  int K = 0;

  ParaOperator A_op;  // Opbw( t(x) |xi|^{2s} eta_R(xi)^2 ),   order 2s
  ParaOperator B_op;  // Opbw( (J1 + v(x)) xi ),               order 1
  ParaOperator C_op;  // diag( |k|^{2s} eta_R(k)^2 ),          order 2s

  double J1 = 0.0;   // (|z1|^2 + |zm1|^2)/2
  double I1 = 0.0;   // 2|z1||zm1| (2|z1||zm1| - J1)
  double nu0 = 0.0;  // (2|z1||zm1| - J1) / eps^2
  double selfadjoint_defect = 0.0;  // max|A - A^H| / max(1, max|A|)
};

// Builds the three operators on the shared truncation K.  Requires
// 0 < eps < 1, theta >= 0, alpha in (0,1), s > 1, and K large enough to hold
// the seeded data modes plus the quantization band: K >= 3 ceil(R) + 2 + 8
// (violations throw std::invalid_argument naming the minimal admissible K).
// The relative self-adjointness defect of A_op must clear 1e-12.
MourreSetup build_setup(double eps, double theta, double alpha, double s,
                        cplx z1, cplx zm1, int K);

//====== operator-level positivity checks ====================================

struct CommutatorReport {
  double min_gap = 0.0;   // min eig of D^{-s} sym(i[A,B] - I1 C) D^{-s}
  double bound = 0.0;     // -C_ref (|z1|^4 + |zm1|^4)/R, C_ref = 100
  double c_measured = 0.0;  // smallest C with min_gap >= -C (...)/R
  double selfadjoint_defect = 0.0;  // relative, of i[A,B]
  int interior_K = 0;     // radius of the truncation-complete block
  bool pass = false;      // min_gap >= bound and defect <= 1e-12
};

// Weighted lower bound for the commutator: forms M = i[A_op,B_op] - I1 C_op,
// symmetrizes, and bounds the minimal eigenvalue of the H^s-weighted form
// against the -C (|z1|^4+|zm1|^4)/R floor with reference constant C = 100.
// The form is evaluated on the interior block |k| <= K-2: both operators
// couple modes two apart, so the two outermost rows carry clipped product
// sums that reflect the lattice edge rather than the operator inequality
// (on the interior the truncated commutator agrees with the full one).
CommutatorReport check_positive_commutator(const MourreSetup& setup);

struct UpperBoundReport {
  double min_gap = 0.0;     // min eig of weighted sym(2|z1||zm1| C - A)
  double bound = 0.0;       // -C_ref (|z1|^2 + |zm1|^2)/R^2, C_ref = 100
  double c_measured = 0.0;  // smallest C with min_gap >= -C (...)/R^2
  double symbol_min = 0.0;  // min over the x-grid of 2|z1||zm1| - t(x)
  bool pass = false;
};

// Weighted upper bound A_op <= 2|z1||zm1| C_op + (small): checks the
// operator gap and the exact pointwise bound 2|z1||zm1| - t(x) >= 0.
UpperBoundReport check_upper_bound(const MourreSetup& setup);

//====== symbol-level decomposition ==========================================

struct EscapeSymbolReport {
  double a1_min = 0.0;        // min over the grid of a1(x)
  double a2_min = 0.0;        // min over the grid of a2(x)
  double a1_max = 0.0;
  double a2_max = 0.0;
  double residual_rel = 0.0;  // |{fa, b} - (I1 + a1) psi1^2 - a2 psi2^2|
                              // (finite-difference bracket), relative to the
                              // max of the analytic decomposition
  double scale = 0.0;         // max of the analytic decomposition on the grid
  bool pass = false;          // a1, a2 >= -1e-13 and residual_rel <= 1e-2
};

// Exact decomposition of the Poisson bracket: {fa, (J1+v)xi} = I1 psi1^2
// + a1(x) psi1^2 + a2(x) psi2^2 with psi1^2 = |xi|^{2s} eta_R^2, psi2^2 =
// |xi|^{2s} eta_R (xi/R) eta'(xi/R), and
//   a1 = 2 J1 |w| (1 + cos phi) + 4(2s-1)|w|^2 sin^2 phi  >= 0,
//   a2 = 8 |w|^2 sin^2 phi                                >= 0,
// where w = z1 conj(zm1) and phi = arg(w e^{2ix}).  The finite-difference
// bracket of the sampled symbols is compared against the decomposition.
// M, Xi < 0 pick the setup's quantization grid.
EscapeSymbolReport escape_symbol_decomposition(const MourreSetup& setup,
                                               int M = -1, int Xi = -1);

//====== growth functional ===================================================

// <A_op z, z> for z supported away from the tangential modes +-1 (throws
// otherwise, and when z carries modes beyond the setup truncation).  The
// imaginary residue must stay below 1e-12 relative to the natural scale
// max(||z||^2, ||A z|| ||z||); it is asserted and discarded.
double a_functional(const MourreSetup& setup, const Field& z);

//====== well-prepared data ==================================================

struct WellPreparedData {
  double eps = 0.0, theta = 0.0, alpha = 0.5, s = 7.0;
  double rho1 = 0.0, rhom1 = 0.0, rho = 0.0;
  int N = 0;           // ceil(R)
  double nu0 = 0.0;    // 2 rho1 rhom1 - (rho1^2 + rhom1^2)/2
  double a0 = 0.0;     // growth functional of the normal part at t = 0
  double b2_threshold = 0.0;  // eps^{3-3theta}
  Field field;         // four modes: +-1, 3N, 3N+2
};

// z(0) = eps rho1 e^{ix} + eps rhom1 e^{-ix} + rho e^{i3Nx} + i rho
// e^{i(3N+2)x}.  Validates the tangential-data inequality (rho1^2 + rhom1^2
// <= 1 and nu0 > 0; std::invalid_argument otherwise) and the seeding
// threshold a0 > eps^{3-3theta} evaluated directly through a_functional
// (std::runtime_error reporting the minimal passing rho otherwise).
// K < 0 defaults to the minimal admissible truncation 3 ceil(R) + 10.
WellPreparedData build_wellprepared(double eps, double theta, double alpha,
                                    double s, double rho1, double rhom1,
                                    double rho, int K = -1);

//====== growth experiment ===================================================

struct GrowthSample {
  double t = 0.0;
  double A = 0.0;               // growth functional
  double hs = 0.0;              // H^s norm of the state
  double lower_envelope = 0.0;  // (A0 - C eps^{3-2theta}) e^{nu0 eps^2 t} + C eps^{3-2theta}
};

struct GrowthResult {
  double rate_fit = 0.0;        // fitted slope of log A after the transient
  double lower_rate = 0.0;      // nu0 eps^2
  double growth_factor = 0.0;   // max A / A(0)
  double gronwall_fraction = 0.0;  // fraction of steps obeying the discrete
                                   // lower bound at c_meas
  double c_meas = 0.0;          // self-calibrated offset constant (95th
                                // percentile of the per-step requirement)
  bool flat = false;            // functional identically ~0 along the run
  bool pass = false;            // rate_fit >= 0.5 lower_rate and
                                // gronwall_fraction >= 0.95
  std::vector<GrowthSample> series;
};

// Propagates the effective equation from the normal part of the prepared
// data and audits the growth functional: fits the log-slope on the window
// from the first e-folding to the running maximum, checks the discrete
// per-step lower bound dA/dt >= eps^2 nu0 (A - C eps^{3-2theta}) at the
// self-calibrated C, and records the exponential lower envelope.  Requires
// horizon_T <= (1/(nu0 eps^2)) log(1/eps) when nu0 > 0 (no bound otherwise;
// a nonpositive nu0 setup has no growth mechanism and runs as a control).
GrowthResult growth_experiment(const MourreSetup& setup,
                               const WellPreparedData& data, double dt,
                               double horizon_T, int record_stride = 1);

// CSV columns: t, A, Hs_norm, lower_envelope.
void dump_growth_csv(const GrowthResult& r, const std::string& path);

// {"rate_fit": ..., "lower_rate": ..., "growth_factor": ...,
//  "gronwall_fraction": ..., "c_meas": ..., "pass": true|false}
std::string growth_summary_json(const GrowthResult& r);

//====== spectra helper ======================================================

// Minimal eigenvalue of the Hermitian part of A via shifted power iteration
// (deterministic start); agrees with min_eig_herm and avoids the full
// decomposition, used above the dense-solver size threshold.
double min_eig_herm_iterative(const Mat& A);

}  // namespace speclab
