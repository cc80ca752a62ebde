//====== fourier.hpp — truncated Fourier fields on the torus =================
//
// A Field stores complex coefficients u_k, k in [-K, K] (index i = k + K).
// Coefficients outside [-K, K] are identically zero by convention.
// All operations are pure; fields are treated as immutable values.

#pragma once

#include <string>
#include <utility>

#include "speclab/common.hpp"

namespace speclab {

//====== field type ==========================================================

struct Field {
  int K = 0;
  Vec c;  // size 2K+1, index k+K

  Field() = default;
  explicit Field(int K_) : K(K_), c(Vec::Zero(2 * K_ + 1)) {}

  cplx at(int k) const {
    return (k < -K || k > K) ? cplx(0.0, 0.0) : c(k + K);
  }
  void set(int k, cplx v) {
    if (k < -K || k > K) throw std::out_of_range("Field::set: |k| > K");
    c(k + K) = v;
  }
  int size() const { return 2 * K + 1; }
};

// Split into the tangential part (modes ±1) and its complement.
struct ModeSplit {
  Field tangential;
  Field normal;
};

//====== construction ========================================================

Field plane_wave(int K, int k, cplx a);

// Random field with coefficients ~ N(0,1)/<k>^{s+1}, rescaled so that the
// H^s norm equals target exactly.
Field random_field(int K, double s, double target_norm, std::mt19937_64& rng);

// Re-truncate to a new radius (zero-pad or drop coefficients).
Field resize(const Field& u, int K_new);

//====== functionals =========================================================

// sqrt( sum <k>^{2s} |u_k|^2 ), <k> = max(1,|k|).
double sobolev_norm(const Field& u, double s);

double mass(const Field& u);      // sum |u_k|^2
double momentum(const Field& u);  // -sum k |u_k|^2

ModeSplit split_modes(const Field& z);

//====== symmetry actions and calculus ======================================

Field translate(const Field& u, double sigma);  // u_k -> u_k e^{ik sigma}
Field gauge(const Field& u, double theta);      // u_k -> u_k e^{i theta}
Field x_derivative(const Field& u);             // u_k -> ik u_k
Field conj_field(const Field& u);               // coefficients of conj(u)

Field operator+(const Field& a, const Field& b);
Field operator-(const Field& a, const Field& b);
Field operator*(cplx s, const Field& a);

//====== products ============================================================

// Exact product via zero-padded FFT; the result carries the full support
// K = a.K + b.K (no truncation, no aliasing).
Field product(const Field& a, const Field& b);

// trunc_K(|u|^2 u_x): cubic nonlinearity on a 2x zero-padded grid, exact for
// every retained mode.
Field cubic_term(const Field& u);

//====== grid transforms (shared FFT engine) =================================

// Values v_i = sum_k c_k e^{ik x_i} on x_i = 2 pi i / P, P >= 2K+1.
Vec grid_values(const Field& u, int P);

// Inverse of grid_values: coefficients k in [-K, K] read off a P-point grid.
Field field_from_grid(const Vec& v, int K);

// Raw DFT helpers (coefficient convention: forward divides by N).
Vec dft_coeffs(const Vec& grid_vals);           // hat a_m, m in bin order
Vec idft_values(const Vec& coeff_bins);         // inverse of dft_coeffs

int next_pow2(int n);

//====== serialization =======================================================

// JSON array of [k, re, im] triples, sorted by k, zeros omitted.
std::string field_to_json(const Field& u);
Field field_from_json(const std::string& text, int K = -1);

}  // namespace speclab
