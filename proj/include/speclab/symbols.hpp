//====== symbols.hpp — sampled symbols a(x, xi) and their constructors ========
//
// A SymbolGrid samples a(x_m, xi_h) on x_m = 2 pi m / M (m = 0..M-1) and the
// half-integer lattice xi_h = -Xi + h/2 (h = 0..4 Xi).  Half integers are
// mandatory: Weyl quantization evaluates symbols at midpoints (j+k)/2.
//
// Quadratic-in-u symbols additionally exist in pair-resolved form (G2Bank):
// the coefficient of u_{j1} u_{j2} e^{i(j1+j2)x} is a polynomial in
// m = j1+j2 and w = |j1|^a + |j2|^a with xi-dependent coefficients.  That
// exact form is what the conjugation flows quantize; the sampled grid is a
// projection of it.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "speclab/fourier.hpp"

namespace speclab {

//====== grid type ===========================================================

struct SymbolGrid {
  Mat values;    // M x (4 Xi + 1); values(m, h) = a(x_m, xi_h)
  double order;  // declared real order in xi
  int M = 0;
  int Xi = 0;

  SymbolGrid() = default;
  SymbolGrid(int M_, int Xi_, double order_)
      : values(Mat::Zero(M_, 4 * Xi_ + 1)), order(order_), M(M_), Xi(Xi_) {}

  int nxi() const { return 4 * Xi + 1; }
  double xi_at(int h) const { return -Xi + 0.5 * h; }
  // lattice index of a half-integer xi (throws if off lattice)
  int h_of(double xi) const;
  double x_at(int m) const { return 2.0 * PI * m / M; }
};

// Resolution defaults for the ambient truncation K: M = 4K+4, Xi = K+2.
int default_M(int K);
int default_Xi(int K);

//====== cutoffs =============================================================

// chi(xi', xi) = 1 for |xi'| <= delta0 <xi>/2, 0 for |xi'| >= delta0 <xi>;
// chi_p uses the max norm of the coefficient frequencies.  delta0 = 1/10.
struct CutoffFamily {
  double delta0 = DELTA0;
  double chi(double xi_prime, double xi) const;
  double chi_p(const std::vector<double>& xi_primes, double xi) const;
};

double chi(double xi_prime, double xi);
double chi_p(const std::vector<double>& xi_primes, double xi);
double eta_R(double xi, double R);  // 0 for xi <= R, 1 for xi >= 2R

//====== x-only symbols (order 0, constant across the xi lattice) ============

// Grid whose every xi column equals the trigonometric polynomial f.
SymbolGrid grid_from_field(const Field& f, double order, int M, int Xi);

// Coefficient-level constructors (exact convolutions, no sampling error).
Field coeffs_underlineV(const Field& u);  // |u|^2 - mass(u)
Field coeffs_underlined(const Field& u);  // Im(u_x conj u), mean removed
Field coeffs_b(const Field& u);           // u u_x
Field coeffs_resV(const Field& z);        // 2 Re sum_{n>=1} z_n conj(z_-n) e^{i2nx}
Field coeffs_beta2(const Field& u, double alpha);
// Polarized form: slot a unconjugated, slot b conjugated, same divisor;
// coeffs_beta2(u) == coeffs_beta2_bilinear(u, u).
Field coeffs_beta2_bilinear(const Field& a, const Field& b, double alpha);

SymbolGrid sym_underlineV(const Field& u, int M = -1, int Xi = -1);
SymbolGrid sym_underlined(const Field& u, int M = -1, int Xi = -1);
SymbolGrid sym_b(const Field& u, int M = -1, int Xi = -1);
SymbolGrid sym_resV(const Field& z, int M = -1, int Xi = -1);
SymbolGrid sym_beta2(const Field& u, double alpha, int M = -1, int Xi = -1);

//====== pair-resolved quadratic symbols and the homological iteration =======

// Coefficient of the (non-conjugated) pair u_{j1} u_{j2} e^{i(j1+j2)x}:
//   sum_{d,r} P[d][r](xi) * m^r * w^d,   m = j1+j2, w = |j1|^a + |j2|^a.
// P[d][r] is stored on the same half-integer lattice as SymbolGrid columns.
struct G2Bank {
  double alpha = 0.5;
  int K = 0;   // truncation of the source field
  int Xi = 0;  // xi lattice radius
  std::vector<std::vector<Vec>> P;  // P[d][r], each of size 4 Xi + 1

  int nxi() const { return 4 * Xi + 1; }
  double xi_at(int h) const { return -Xi + 0.5 * h; }
  int h_of(double xi) const;

  // exact pair coefficient at lattice point h (no cutoff applied)
  cplx pair_coeff(int j1, int j2, int h) const;
};

// One homological step: solve 2i|xi|^a g = -(numerator), guard value 0 at
// xi = 0; r-part Taylor tail uses exact d^l/dxi^l |xi|^a.
struct G2Result {
  G2Bank g2;        // g^{(1)} + ... + g^{(p)}, order -alpha
  G2Bank residual;  // i r[g^{(p)}] - i f[g^{(p)}], order -p alpha
  int p = 0;
};

G2Result build_g2(const Field& u, double alpha, double rho, int Xi = -1);

// Sample a bank on an x-grid (sum over pairs done exactly via FFT).
SymbolGrid bank_to_grid(const G2Bank& bank, const Field& u, double order,
                        int M = -1);

// Spec-facing wrapper: (g2 grid of order -alpha, residual grid of order
// -p alpha <= -rho).
std::pair<SymbolGrid, SymbolGrid> sym_g2(const Field& u, double alpha,
                                         double rho, int M = -1, int Xi = -1);

//====== escape-function symbols and effective constants =====================

// fa(x, xi) = t(x) |xi|^{2s} eta_R(xi)^2, t(x) = -Im(z1 conj(zm1) e^{i2x}).
SymbolGrid sym_fa(double s, double R, cplx z1, cplx zm1, int M = -1,
                  int Xi = -1);

// J1 = (|z1|^2 + |zm1|^2)/2;  I1 = 2|z1||zm1| (2|z1||zm1| - J1).
std::pair<double, double> constants_J1_I1(cplx z1, cplx zm1);

// fv(x) = 2 Re(z1 conj(zm1) e^{i2x}), xi-independent.
SymbolGrid sym_fv(cplx z1, cplx zm1, int M = -1, int Xi = -1);

//====== diagnostics and dumps ===============================================

double max_abs(const SymbolGrid& a);
double max_imag(const SymbolGrid& a);
double mean_abs_over_max(const SymbolGrid& a);  // |spatial mean| / max

// CSV columns: x_index, xi_times_2 (integer), re, im.
void dump_symbol_csv(const SymbolGrid& a, const std::string& path);

}  // namespace speclab
