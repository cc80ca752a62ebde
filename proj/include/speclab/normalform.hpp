//====== normalform.hpp — conjugation flows, cubic tables, decay checks ======
//
// Linear operators on truncated fields are handled in pair form: a PP block
// acting on the field and a PM block acting on its reflected conjugate
// w_j = conj(u_{-j}).  The remaining blocks of the doubled system follow by
// reality, MM = reflconj(PP), MP = reflconj(PM), so only two matrices are
// stored.  Three conjugation flows are provided: an out-diagonal flow
// driven by the homological pair bank, a transport flow straightening the
// first-order coefficient, and a smoothing flow generated by a cubic
// coefficient table.  Each flow integrates forward and inverse together and
// records a step-halving trace.  Cubic vector fields are stored as
// canonical signed monomials, extracted from sampled fields by a phase-DFT
// over seventh roots of unity, and compared class-by-class against closed
// forms on the four-wave index sets.

#pragma once

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "speclab/fourier.hpp"
#include "speclab/paradiff.hpp"
#include "speclab/resonance.hpp"
#include "speclab/symbols.hpp"

namespace speclab {

//====== pair operators ======================================================

struct PairOperator {
  Mat PP;  // field -> field block
  Mat PM;  // reflected-conjugate -> field block

  PairOperator() = default;
  explicit PairOperator(int K)
      : PP(Mat::Zero(2 * K + 1, 2 * K + 1)),
        PM(Mat::Zero(2 * K + 1, 2 * K + 1)) {}

  int K() const { return (static_cast<int>(PP.rows()) - 1) / 2; }
};

PairOperator pair_identity(int K);
// (A B) — composition in pair form; PM blocks couple through reflconj.
PairOperator pair_compose(const PairOperator& A, const PairOperator& B);
PairOperator pair_add(const PairOperator& A, const PairOperator& B);
PairOperator pair_scale(const cplx& c, const PairOperator& A);
// (M u)_k = sum_j PP_{kj} u_j + PM_{kj} conj(u_{-j})
Field pair_apply(const PairOperator& M, const Field& u);
// Doubled (4K+2)-dimensional matrix [[PP, PM], [reflconj(PM), reflconj(PP)]].
Mat pair_doubled(const PairOperator& M);
// max-abs entry distance over both blocks
double pair_dist(const PairOperator& A, const PairOperator& B);
// H^0 operator norm of (A B - Id) on the doubled system
double pair_id_defect(const PairOperator& A, const PairOperator& B);
// G_theta M G_theta^{-1} for the phase rotation u -> e^{i theta} u:
// PP unchanged, PM multiplied by e^{2 i theta}.
PairOperator pair_gauge_conjugate(const PairOperator& M, double theta);

//====== cubic coefficient maps ==============================================

// One canonical signed monomial u^{s_0}_{j_0} u^{s_1}_{j_1} u^{s_2}_{j_2}
// feeding output mode k of the + component (u^- means conjugate).  Slots
// are sorted (s descending, then j ascending) so each monomial has exactly
// one key.
struct CubicKey {
  std::array<int, 3> j{};
  std::array<int, 3> s{};  // +1 / -1
  int k = 0;

  friend bool operator<(const CubicKey& a, const CubicKey& b) {
    return std::tie(a.s, a.j, a.k) < std::tie(b.s, b.j, b.k);
  }
  friend bool operator==(const CubicKey& a, const CubicKey& b) {
    return a.s == b.s && a.j == b.j && a.k == b.k;
  }
};

CubicKey canonical_cubic_key(std::array<int, 3> j, std::array<int, 3> s,
                             int k);
// The 4-slot tuple (output leg sign-flipped); momentum/gauge hold whenever
// the monomial conserves them.
IndexTuple cubic_key_tuple(const CubicKey& key);

// Lumped monomial coefficients: field_k = sum_mu c_mu prod_a u^{s_a}_{j_a}.
using CubicCoeffs = std::map<CubicKey, cplx>;

// Lump a dense ordered table (one sign pattern + orderings multiplicity)
// into canonical monomials; drops entries below 1e-15.
CubicCoeffs cubic_from_table(const CubicTable& t);
// Evaluate the + component of the stored field on u at truncation K.
Field cubic_eval(const CubicCoeffs& c, const Field& u, int K);
// Mirror-conjugate table (the - component seen as a + table); reality of
// the underlying vector field means mirror(c) == c for tables built here.
CubicCoeffs cubic_mirror(const CubicCoeffs& c);
double cubic_dist(const CubicCoeffs& a, const CubicCoeffs& b);

//====== homological division (smoothing generator table) ===================

struct Q2Table {
  double alpha = 0.5;
  CubicCoeffs q;               // generator coefficients c / (i omega)
  double min_divisor = 0.0;    // smallest |omega| actually divided by
  double certified_floor = 0.0;  // audit floor the divisions were checked
                                 // against (weighted for n = 2)
  long long divided = 0;       // monomials divided
  long long kept = 0;          // monomials left to the resonant set
};

// Divides every nonresonant monomial with n_outside <= 2 by i omega; keeps
// the resonant classes (n <= 2 structural) and everything with n >= 3.
// When exclude_transport_band is set, nonresonant n = 2 monomials whose two
// outside legs are the operand/output pair of a unit-pair coefficient (the
// first-order transport band handled by the transport flow) are kept, not
// divided.  Throws if asked to divide a resonant tuple or if a divisor
// falls below the certified floor.
Q2Table build_Q2(const CubicCoeffs& r2, double alpha,
                 bool exclude_transport_band = true);

// Pair-form generator contracted with coefficient fields (a, b): slot
// weights q/3 per operand choice, built so that
// pair_apply(q2_generator(T, u, u, K), u) == cubic_eval(T.q, u, K).
PairOperator q2_generator(const Q2Table& t, const Field& a, const Field& b,
                          int K);

//====== conjugation flows ===================================================

struct FlowStepRecord {
  int steps = 0;      // step count of the accepted integration
  double diff = 0.0;  // max-abs distance to the half-step integration
};

struct FlowResult {
  PairOperator forward;
  PairOperator inverse;
  std::vector<FlowStepRecord> generator_trace;
  bool converged = true;
  std::string note;
};

// exp-flow of the out-diagonal generator: G_PP = 0, G_PM the homological
// pair quantization of the order-(-alpha) bank at regularity rho.
FlowResult flow_outdiag(const Field& u, double alpha, double rho,
                        int base_steps = 16);
// Transport flow: generator i beta(x) / (1 + tau beta'(x)) xi, integrated
// tau in [0,1].  Throws if 1 + tau beta' loses positivity on the grid.
FlowResult flow_transport(const Field& u, double alpha, int base_steps = 16);
// Smoothing flow of the constant generator contracted from the table.
FlowResult flow_smoothing(const Q2Table& q2, const Field& u, int K,
                          int base_steps = 16);

//====== composed conjugation ================================================

struct ConjugationConfig {
  double alpha = 0.5;
  double rho = 1.0;
  bool with_transport = true;
  bool with_smoothing = false;
  const Q2Table* q2 = nullptr;  // required when with_smoothing
  int base_steps = 16;
};

// F(u): the composed map (smoothing o transport o out-diagonal), plus its
// inverse and the direction-v variational derivative dF[v] at tau = 1.
struct ConjugationMap {
  PairOperator F;
  PairOperator Finv;
  PairOperator dF;  // variational derivative in the direction passed in
};

ConjugationMap conjugation_map(const ConjugationConfig& cfg, const Field& u,
                               const Field* direction = nullptr);
// Z = F(u) u
Field conjugation_forward(const ConjugationConfig& cfg, const Field& u);
// Contraction iteration U <- Z - (F(U) - Id) U; throws if the residual
// still exceeds tol * (1 + |Z|) after max_iter steps.
Field conjugation_inverse(const ConjugationConfig& cfg, const Field& z,
                          int max_iter = 6, double tol = 1e-10);
// Push-forward of the renormalized vector field through F evaluated at
// Z = F(u) u:  X_Z = F(u) X_U(u) + dF[X_U(u)] u.
Field conjugated_field(const ConjugationConfig& cfg, const Field& u);
// X_Z + i Omega Z at Z = F(u) u — the nonlinear part of the conjugated
// field, the map whose cubic coefficients the phase extraction samples.
Field conjugated_nonlinear(const ConjugationConfig& cfg, const Field& u);

//====== cubic extraction (phase DFT) ========================================

struct CubicExtraction {
  CubicCoeffs coeffs;        // Richardson pair at the two smallest lambdas
  double consistency = 0.0;  // max bin distance between Richardson pairs
  std::vector<double> lambdas;
};

// Extracts the cubic monomial coefficients of an odd field map G over the
// given support modes.  Phases run over seventh roots of unity (degree
// vectors of cubic monomials are distinct mod 7 except the |d| = 1 bins,
// which are split by amplitude patterns); lambda-scaling plus Richardson
// removes the quintic tail.
CubicExtraction extract_cubic_field(
    const std::function<Field(const Field&)>& G, const std::vector<int>& support,
    int K, const std::vector<double>& lambdas = {0.0625, 0.03125, 0.015625});

//====== verification reports ================================================

struct TransportIdentityReport {
  double residual = 0.0;  // max modulus over the collocation grid
  double bound = 0.0;     // 1e-12 * |u|_{H0}^2
  bool pass = false;
};

// Exactness of the first-order homological identity:
// 2 beta(-i Omega u, u; x) + underline(V)(x) - <V>(x) = 0 pointwise.
TransportIdentityReport verify_transport_identity(const Field& u,
                                                  double alpha);

struct StrongLambdaReport {
  double p0_residual = 0.0;   // distance to the closed form on n = 0
  double p1_residual = 0.0;   // max |coeff| over n = 1
  double p2_residual = 0.0;   // max |coeff| over n = 2
  double extraction_error = 0.0;
  double budget = 0.0;
  bool pass = false;
};

// Class-by-class check of an extracted conjugated cubic table: the n = 0
// coefficients equal -+ i on |z_{+-1}|^2 z_{+-1} and vanish elsewhere; the
// n = 1 and n = 2 classes vanish within the extraction budget.
StrongLambdaReport verify_strong_lambda(const CubicCoeffs& conjugated,
                                        double extraction_error,
                                        double alpha);

struct ShellNorm {
  double center = 0.0;
  double norm = 0.0;
};

struct BlockDiagReport {
  std::vector<ShellNorm> conjugated;  // out-diagonal block after conjugation
  std::vector<ShellNorm> baseline;    // first-order dressed coefficient
  double slope_conjugated = 0.0;      // dyadic log-log fit
  double slope_baseline = 0.0;
  double rho = 0.0;
  double target = 0.0;  // -rho + 0.3
  bool pass = false;
};

// Conjugates the quadratic out-diagonal part of the linearized flow by the
// out-diagonal exp-flow, extracts the quadratic order in lambda, and
// measures shell-restricted H0 norms of the remaining out-diagonal block
// on interior dyadic shells, against the first-order baseline b(x) i xi.
BlockDiagReport verify_block_diagonalization(
    const Field& u, double alpha, double rho,
    const std::vector<double>& lambdas = {0.0625, 0.03125, 0.015625});

void dump_decay_csv(const std::vector<ShellNorm>& shells,
                    const std::string& path);

nlohmann::json to_json(const TransportIdentityReport& r);
nlohmann::json to_json(const StrongLambdaReport& r);
nlohmann::json to_json(const BlockDiagReport& r);

}  // namespace speclab
