//====== paradiff.hpp — quantization, symbol calculus, operator diagnostics ==
//
// Operators are dense (2K+1)^2 complex matrices acting on Field coefficient
// vectors, entry A_{k,j} at (k+K, j+K).  Quantization reads the symbol's
// spatial Fourier coefficient at m = k-j evaluated at the Weyl midpoint
// (k+j)/2 — always a point of the half-integer lattice when Xi >= K.

#pragma once

#include <string>

#include "speclab/symbols.hpp"

namespace speclab {

//====== operator type =======================================================

enum class Provenance { QuantizedSymbol, Commutator, Flow, Composition };
std::string to_string(Provenance p);

struct ParaOperator {
  Mat matrix;    // (2K+1) x (2K+1)
  double order;  // declared real order
  Provenance provenance = Provenance::QuantizedSymbol;

  int K() const { return (static_cast<int>(matrix.rows()) - 1) / 2; }
};

Field apply(const ParaOperator& A, const Field& u);
Field apply_matrix(const Mat& A, const Field& u);

//====== quantization ========================================================

// Bony-Weyl: A_{k,j} = chi(k-j, (k+j)/2) * ahat(k-j, (k+j)/2).
// K < 0 uses the grid's ambient truncation (Xi - 2, inverse of default_Xi).
ParaOperator quantize_bw(const SymbolGrid& a, int K = -1);

// Weyl: same spectral data, no cutoff factor.
ParaOperator quantize_weyl(const SymbolGrid& a, int K = -1);

// Homogeneous-path quantization of a pair bank (coefficient of
// a_{j1} b_{j2} e^{i(j1+j2)x}); the cutoff is the chi_p variant evaluated at
// max(|j1|, |j2|).  Both slots unconjugated; callers pass conjugated fields
// for minus slots.
Mat quantize_bw_hom2(const G2Bank& bank, const Field& ua, const Field& ub,
                     int K);

//====== symbol calculus =====================================================

// D_x = (1/i) d/dx via the spectral grid (exact on trig polynomials);
// d/dxi via centred differences of step 1/2 (one-sided at lattice edges).
SymbolGrid deriv_x(const SymbolGrid& a);   // d/dx
SymbolGrid deriv_Dx(const SymbolGrid& a);  // (1/i) d/dx
SymbolGrid deriv_xi(const SymbolGrid& a);

// a #_rho b = sum_{k<=rho} 2^{-k} sum_{l+beta=k} (-1)^beta/(l! beta!)
//             (dxi^l Dx^beta a)(dxi^beta Dx^l b)
SymbolGrid compose_expansion(const SymbolGrid& a, const SymbolGrid& b,
                             int rho);

// {a,b} = dxi a dx b - dx a dxi b
SymbolGrid poisson_bracket(const SymbolGrid& a, const SymbolGrid& b);

//====== norms and spectra ===================================================

// Largest singular value of D_{s_to} A D_{s_from}^{-1}, D_s = diag(<k>^s),
// by power iteration on the normal matrix (deterministic start).
double op_norm(const Mat& A, double s_from, double s_to);

// Same, with the input restricted to modes jmin <= |j| <= jmax.
double op_norm_shell(const Mat& A, double s_from, double s_to, int jmin,
                     int jmax);

// Minimal eigenvalue of the Hermitian part (A + A^H)/2.
double min_eig_herm(const Mat& A);

//====== remainder and lower-bound checks ====================================

// Operator norm of Opbw(a) Opbw(b) - Opbw(a #_rho b) as a map
// H^s -> H^{s - (order a + order b) + rho}; optional restriction of the
// input to the shell jmin <= |j| <= jmax (used by dyadic-decay sweeps).
double remainder_norm(const SymbolGrid& a, const SymbolGrid& b, int rho,
                      double s = 0.0, int jmin = -1, int jmax = -1);

// Strong-Garding check for Opbw(a_func(x) psi(xi)^2): returns the minimal
// eigenvalue of the s-weighted symmetrization and the floor
// -C ||a||_{W3,inf} / R^2 with the fixed reference constant C = 100.
struct GardingResult {
  double min_quadform = 0.0;
  double bound = 0.0;
  double c_measured = 0.0;  // smallest C for which min_quadform >= -C ||a||/R^2
};
GardingResult garding_check(const SymbolGrid& a_func, const SymbolGrid& psi,
                            double R, double s);

//====== structure checks ====================================================

// conj_dev : max entry deviation of reflconj(A) vs quantize of conj(a(x,-xi))
//            (reflconj(M)_{k,j} = conj(M_{-k,-j}); conjugation of fields)
// adjoint_dev: max entry deviation of A^H vs quantize of conj(a(x,xi))
struct RealityDiagnostics {
  double conj_dev = 0.0;
  double adjoint_dev = 0.0;
};
RealityDiagnostics reality_and_adjoint_checks(const SymbolGrid& a);

// reflconj(M)_{k,j} = conj(M_{-k,-j}) — conjugation-by-reality of operators.
Mat reflconj(const Mat& A);

//====== dumps ===============================================================

// CSV columns k, j, re, im; zero entries omitted.
void dump_operator_csv(const Mat& A, const std::string& path);

}  // namespace speclab
