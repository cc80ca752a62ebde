//====== resonance.hpp — 4-wave index sets, lower-bound audit, projections ===
//
// Index tuples carry four signed integer indices subject to the momentum
// constraint sigma.j = 0 and the gauge constraint sum(sigma) = 0 (hence
// always two + and two - signs).  Classification counts indices outside
// Lambda = {-1,+1}; resonance for n <= 2 is decided structurally (pairwise
// cancellation patterns), for n >= 3 numerically with a high-precision
// companion recheck.

#pragma once

#include <array>
#include <functional>

#include <nlohmann/json.hpp>

#include "speclab/fourier.hpp"

namespace speclab {

//====== index tuples ========================================================

struct IndexTuple {
  std::array<int, 4> j{};
  std::array<int, 4> sigma{};  // entries +1 / -1

  bool momentum_ok() const {
    return sigma[0] * j[0] + sigma[1] * j[1] + sigma[2] * j[2] +
               sigma[3] * j[3] ==
           0;
  }
  bool gauge_ok() const {
    return sigma[0] + sigma[1] + sigma[2] + sigma[3] == 0;
  }
  bool in_P4() const { return momentum_ok() && gauge_ok(); }
};

struct ResonanceTag {
  int n_outside = 0;   // indices with |j| != 1, counted over all four slots
  bool resonant = false;
};

// Floating tolerance for the n >= 3 resonance test.
inline constexpr double kResonanceTol = 1e-12;

// Visits every tuple with |j_a| <= J satisfying both constraints, exactly
// once, ordered: all six two-plus sign patterns, j1..j3 free, j4 solved.
void enumerate_P4(int J, const std::function<void(const IndexTuple&)>& visit);

// sum_a sigma_a |j_a|^alpha
double omega_sum(const IndexTuple& t, double alpha);

int n_outside_lambda(const IndexTuple& t);

// n = 0: always resonant (gauge cancels the unit moduli).
// n = 1: never resonant.
// n = 2: resonant iff the two outside indices have equal modulus and
//        opposite signs (the pairwise pattern; momentum excludes the rest).
// n >= 3: |omega_sum| <= kResonanceTol.
ResonanceTag classify(const IndexTuple& t, double alpha);

// 50-significant-digit recheck of the frequency sum (threshold 1e-40).
bool resonant_hp(const IndexTuple& t, double alpha);

//====== lower-bound audit ===================================================

struct AuditClassBound {
  double value = 0.0;
  IndexTuple attaining{};
  bool attained = false;
};

struct AuditReport {
  int J = 0;
  double alpha = 0.0;
  double lemma_bound_P1 = 0.0;     // 2^alpha - 1
  AuditClassBound min_abs_omega_P1;
  AuditClassBound min_weighted_P2;  // |omega| * max_a |j_a|^{1-alpha}
  bool S1_empty = true;
  std::array<long long, 5> count_by_n{};  // tuples per n_outside
  long long n2_structural_mismatch = 0;   // structural vs numeric disagreements
  long long hp_candidates = 0;            // n >= 3 with |omega| <= tol
  long long hp_confirmed_zero = 0;
  long long hp_rejected = 0;
};

// Exhaustive sweep over |j_a| <= J; partitionable over j1 ranges.
AuditReport audit_lower_bounds(int J, double alpha, int threads = 1);

nlohmann::json to_json(const AuditReport& r);

//====== cubic coefficient tables ============================================

// Dense table of a gauge/translation-invariant cubic vector field for one
// sign pattern; entry (j1,j2,j3) feeds the output mode k = sig_out * sig.j
// of the sig_out component.  Stored coefficients are symmetric under
// permutations of equal-sign slots.
struct CubicTable {
  int J = 0;
  std::array<int, 3> sig{+1, -1, +1};
  int sig_out = +1;
  std::vector<cplx> c;  // (2J+1)^3

  explicit CubicTable(int J_ = 0)
      : J(J_), c(static_cast<size_t>(2 * J_ + 1) * (2 * J_ + 1) * (2 * J_ + 1),
                 cplx(0.0, 0.0)) {}

  size_t idx(int j1, int j2, int j3) const {
    const size_t n = 2 * J + 1;
    return (static_cast<size_t>(j1 + J) * n + static_cast<size_t>(j2 + J)) *
               n +
           static_cast<size_t>(j3 + J);
  }
  cplx at(int j1, int j2, int j3) const { return c[idx(j1, j2, j3)]; }
  int out_k(int j1, int j2, int j3) const {
    return sig_out * (sig[0] * j1 + sig[1] * j2 + sig[2] * j3);
  }
  // The 4-slot tuple of an entry; the output leg carries the flipped sign,
  // making momentum and gauge hold identically.
  IndexTuple tuple(int j1, int j2, int j3) const {
    return IndexTuple{{j1, j2, j3, out_k(j1, j2, j3)},
                      {sig[0], sig[1], sig[2], -sig_out}};
  }
};

// Coefficient of u_{j1}^{s1} u_{j2}^{s2} u_{j3}^{s3} -> mode k of the
// sig_out component: (i/6)(j3 d_{j1!=j2} + j1 d_{j3!=j2}
// - j2 (d_{j1=j2} + d_{j3=j2})) for patterns equivalent to (+,-,+) -> +;
// conjugate-reflected for the mirrored patterns; zero otherwise.
cplx x3_coefficients(const std::array<int, 3>& j, int k,
                     const std::array<int, 3>& sig, int sig_out = +1);

// Full table of the cubic part of the renormalized flow at truncation J.
CubicTable x3_table(int J);

// Zeroes every entry whose 4-slot tuple fails the selector; validates the
// equal-sign-slot symmetry first and rejects non-symmetric input.
CubicTable project_cubic(const CubicTable& t,
                         const std::function<bool(const IndexTuple&)>& keep);

// Selectors for the audit classes: membership by n_outside alone, and
// resonant membership by classify.
std::function<bool(const IndexTuple&)> select_P(int n);
std::function<bool(const IndexTuple&)> select_S(int n, double alpha);

// Evaluates the vector field's sig_out component on u: the stored pattern
// summed over ordered indices, times the number of distinct orderings of
// the sign multiset (3 for two-same-one-other).
Field assemble_cubic(const CubicTable& t, const Field& u);

}  // namespace speclab
