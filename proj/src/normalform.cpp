//====== normalform.cpp — conjugation flows, cubic tables, decay checks ======

#include "speclab/normalform.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "speclab/dynamics.hpp"

namespace speclab {

namespace {

constexpr double kFlowTol = 1e-11;  // step-halving acceptance on the flow
constexpr int kMaxSteps = 2048;     // first-order generators need O(|b| K)

double abs_pow_nf(int j, double a) {
  return j == 0 ? 0.0 : std::pow(std::abs(static_cast<double>(j)), a);
}

bool mat_zero(const Mat& A) { return A.size() == 0 || A.isZero(0.0); }

void mul_acc(Mat& C, const Mat& A, const Mat& B) {
  if (mat_zero(A) || mat_zero(B)) return;
  C.noalias() += A * B;
}

void check_alpha(double alpha, const char* who) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument(std::string(who) + ": alpha in (0,1) required");
}

}  // namespace

//====== pair operators ======================================================

PairOperator pair_identity(int K) {
  PairOperator M(K);
  M.PP = Mat::Identity(2 * K + 1, 2 * K + 1);
  return M;
}

PairOperator pair_compose(const PairOperator& A, const PairOperator& B) {
  if (A.K() != B.K())
    throw std::invalid_argument("pair_compose: truncation mismatch");
  PairOperator C(A.K());
  mul_acc(C.PP, A.PP, B.PP);
  mul_acc(C.PP, A.PM, reflconj(B.PM));
  mul_acc(C.PM, A.PP, B.PM);
  mul_acc(C.PM, A.PM, reflconj(B.PP));
  return C;
}

PairOperator pair_add(const PairOperator& A, const PairOperator& B) {
  if (A.K() != B.K())
    throw std::invalid_argument("pair_add: truncation mismatch");
  PairOperator C(A.K());
  C.PP = A.PP + B.PP;
  C.PM = A.PM + B.PM;
  return C;
}

PairOperator pair_scale(const cplx& c, const PairOperator& A) {
  PairOperator C(A.K());
  C.PP = c * A.PP;
  C.PM = c * A.PM;
  return C;
}

Field pair_apply(const PairOperator& M, const Field& u) {
  const int K = M.K();
  const Field v = resize(u, K);
  Vec w(2 * K + 1);
  for (int j = -K; j <= K; ++j) w(j + K) = std::conj(v.at(-j));
  Field out(K);
  out.c = M.PP * v.c + M.PM * w;
  return out;
}

Mat pair_doubled(const PairOperator& M) {
  const int n = static_cast<int>(M.PP.rows());
  Mat D = Mat::Zero(2 * n, 2 * n);
  D.topLeftCorner(n, n) = M.PP;
  D.topRightCorner(n, n) = M.PM;
  D.bottomLeftCorner(n, n) = reflconj(M.PM);
  D.bottomRightCorner(n, n) = reflconj(M.PP);
  return D;
}

double pair_dist(const PairOperator& A, const PairOperator& B) {
  return std::max((A.PP - B.PP).cwiseAbs().maxCoeff(),
                  (A.PM - B.PM).cwiseAbs().maxCoeff());
}

double pair_id_defect(const PairOperator& A, const PairOperator& B) {
  PairOperator C = pair_compose(A, B);
  Mat D = pair_doubled(C);
  D -= Mat::Identity(D.rows(), D.cols());
  // doubled matrices are even-dimensional; take the spectral norm directly
  Eigen::BDCSVD<Mat> svd(D);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

PairOperator pair_gauge_conjugate(const PairOperator& M, double theta) {
  PairOperator C(M.K());
  C.PP = M.PP;
  C.PM = std::polar(1.0, 2.0 * theta) * M.PM;
  return C;
}

//====== cubic coefficient maps ==============================================

CubicKey canonical_cubic_key(std::array<int, 3> j, std::array<int, 3> s,
                             int k) {
  std::array<std::pair<int, int>, 3> slot;
  for (int a = 0; a < 3; ++a) slot[a] = {-s[a], j[a]};  // sort + before -
  std::sort(slot.begin(), slot.end());
  CubicKey key;
  for (int a = 0; a < 3; ++a) {
    key.s[a] = -slot[a].first;
    key.j[a] = slot[a].second;
  }
  key.k = k;
  return key;
}

IndexTuple cubic_key_tuple(const CubicKey& key) {
  return IndexTuple{{key.j[0], key.j[1], key.j[2], key.k},
                    {key.s[0], key.s[1], key.s[2], -1}};
}

CubicCoeffs cubic_from_table(const CubicTable& t) {
  CubicCoeffs out;
  for (int j1 = -t.J; j1 <= t.J; ++j1)
    for (int j2 = -t.J; j2 <= t.J; ++j2)
      for (int j3 = -t.J; j3 <= t.J; ++j3) {
        const cplx c = t.at(j1, j2, j3);
        if (std::abs(c) <= 1e-15) continue;
        // ordered table with sign-multiset multiplicity 3 (assemble_cubic)
        const CubicKey key = canonical_cubic_key(
            {j1, j2, j3}, t.sig, t.sig_out * t.out_k(j1, j2, j3));
        out[key] += 3.0 * c;
      }
  for (auto it = out.begin(); it != out.end();)
    it = (std::abs(it->second) <= 1e-15) ? out.erase(it) : std::next(it);
  return out;
}

Field cubic_eval(const CubicCoeffs& c, const Field& u, int K) {
  Field out(K);
  for (const auto& [key, coef] : c) {
    if (std::abs(key.k) > K) continue;
    cplx prod = coef;
    for (int a = 0; a < 3; ++a) {
      const cplx f = u.at(key.j[a]);
      prod *= (key.s[a] > 0) ? f : std::conj(f);
    }
    out.c(key.k + K) += prod;
  }
  return out;
}

CubicCoeffs cubic_mirror(const CubicCoeffs& c) {
  // reflection-conjugation u_k -> conj(u_{-k}) negates frequencies and
  // conjugates coefficients; the sign pattern is preserved
  CubicCoeffs out;
  for (const auto& [key, coef] : c) {
    const CubicKey m =
        canonical_cubic_key({-key.j[0], -key.j[1], -key.j[2]},
                            {key.s[0], key.s[1], key.s[2]}, -key.k);
    out[m] += std::conj(coef);
  }
  return out;
}

double cubic_dist(const CubicCoeffs& a, const CubicCoeffs& b) {
  double d = 0.0;
  for (const auto& [key, coef] : a) {
    const auto it = b.find(key);
    const cplx other = (it == b.end()) ? cplx(0.0, 0.0) : it->second;
    d = std::max(d, std::abs(coef - other));
  }
  for (const auto& [key, coef] : b)
    if (a.find(key) == a.end()) d = std::max(d, std::abs(coef));
  return d;
}

//====== homological division ================================================

namespace {

// Transport band: nonresonant n = 2 monomials whose outside legs carry
// opposite tuple signs (the unit pair cancels, leaving a vanishing-at-
// infinity divisor |j|^a - |k|^a); these are straightened by the transport
// flow, not divided.
bool in_transport_band(const IndexTuple& t) {
  int sum_sigma_outside = 0;
  for (int a = 0; a < 4; ++a)
    if (std::abs(t.j[a]) != 1) sum_sigma_outside += t.sigma[a];
  return sum_sigma_outside == 0;
}

}  // namespace

Q2Table build_Q2(const CubicCoeffs& r2, double alpha,
                 bool exclude_transport_band) {
  check_alpha(alpha, "build_Q2");
  Q2Table out;
  out.alpha = alpha;
  out.min_divisor = std::numeric_limits<double>::infinity();

  // Audit floors: n = 1 uses the class lower bound 2^alpha - 1; n = 2 uses
  // the weighted floor |omega| max|j|^{1-alpha} >= (2 - 2^alpha) 2^{1-alpha}.
  const double floor1 = std::pow(2.0, alpha) - 1.0;
  const double floor2w = (2.0 - std::pow(2.0, alpha)) * std::pow(2.0, 1.0 - alpha);
  out.certified_floor = floor1;

  for (const auto& [key, coef] : r2) {
    const IndexTuple t = cubic_key_tuple(key);
    if (!t.in_P4())
      throw std::invalid_argument(
          "build_Q2: coefficient violates momentum/gauge balance");
    const ResonanceTag tag = classify(t, alpha);
    const int n = tag.n_outside;
    const bool keep = tag.resonant || n >= 3 ||
                      (exclude_transport_band && n == 2 && in_transport_band(t));
    if (keep) {
      ++out.kept;
      continue;
    }
    const double omega = omega_sum(t, alpha);
    if (std::abs(omega) <= kResonanceTol)
      throw std::runtime_error("build_Q2: attempted division by a resonant "
                               "frequency combination");
    if (n == 1 && std::abs(omega) < floor1 - 1e-12)
      throw std::runtime_error("build_Q2: n = 1 divisor below certified floor");
    if (n == 2) {
      double jmax = 0.0;
      for (int a = 0; a < 4; ++a)
        jmax = std::max(jmax, std::abs(static_cast<double>(t.j[a])));
      if (std::abs(omega) * std::pow(jmax, 1.0 - alpha) < floor2w - 1e-12)
        throw std::runtime_error(
            "build_Q2: n = 2 weighted divisor below certified floor");
    }
    out.min_divisor = std::min(out.min_divisor, std::abs(omega));
    out.q[key] = coef / (I * omega);
    ++out.divided;
  }
  if (out.divided == 0) out.min_divisor = 0.0;
  return out;
}

PairOperator q2_generator(const Q2Table& t, const Field& a, const Field& b,
                          int K) {
  PairOperator G(K);
  for (const auto& [key, qv] : t.q) {
    if (std::abs(key.k) > K) continue;
    const cplx w3 = qv / 3.0;  // per operand-slot weight
    for (int w = 0; w < 3; ++w) {
      const int o1 = (w == 0) ? 1 : 0;
      const int o2 = (w == 2) ? 1 : 2;
      const cplx fa = (key.s[o1] > 0) ? a.at(key.j[o1])
                                      : std::conj(a.at(key.j[o1]));
      const cplx fb = (key.s[o2] > 0) ? b.at(key.j[o2])
                                      : std::conj(b.at(key.j[o2]));
      const cplx val = w3 * fa * fb;
      if (val == cplx(0.0, 0.0)) continue;
      if (std::abs(key.j[w]) > K) continue;
      if (key.s[w] > 0)
        G.PP(key.k + K, key.j[w] + K) += val;
      else
        G.PM(key.k + K, -key.j[w] + K) += val;
    }
  }
  return G;
}

//====== flow engine =========================================================

namespace {

// gen(tau) must fill G; dgen is optional (variational direction).
using GenFn = std::function<PairOperator(double)>;

struct FlowState {
  PairOperator fwd, inv, var;
  bool want_var = false;
};

struct FlowDeriv {
  PairOperator fwd, inv, var;
};

FlowDeriv flow_rhs(const PairOperator& G, const PairOperator* dG,
                   const FlowState& S) {
  FlowDeriv d;
  d.fwd = pair_compose(G, S.fwd);
  d.inv = pair_scale(-1.0, pair_compose(S.inv, G));
  if (dG) d.var = pair_add(pair_compose(*dG, S.fwd), pair_compose(G, S.var));
  return d;
}

FlowState state_axpy(const FlowState& S, double h, const FlowDeriv& D) {
  FlowState R = S;
  R.fwd = pair_add(R.fwd, pair_scale(h, D.fwd));
  R.inv = pair_add(R.inv, pair_scale(h, D.inv));
  if (S.want_var) R.var = pair_add(R.var, pair_scale(h, D.var));
  return R;
}

FlowState integrate_pair_flow(int K, int n, const GenFn& gen,
                              const GenFn* dgen) {
  FlowState S;
  S.fwd = pair_identity(K);
  S.inv = pair_identity(K);
  S.var = PairOperator(K);
  S.want_var = (dgen != nullptr);

  const double h = 1.0 / n;
  PairOperator Gl = gen(0.0);
  PairOperator dGl = dgen ? (*dgen)(0.0) : PairOperator();
  for (int i = 0; i < n; ++i) {
    const double tau = i * h;
    const PairOperator Gm = gen(tau + 0.5 * h);
    const PairOperator Gr = gen(tau + h);
    PairOperator dGm, dGr;
    if (dgen) {
      dGm = (*dgen)(tau + 0.5 * h);
      dGr = (*dgen)(tau + h);
    }
    const PairOperator* pdl = dgen ? &dGl : nullptr;
    const PairOperator* pdm = dgen ? &dGm : nullptr;
    const PairOperator* pdr = dgen ? &dGr : nullptr;

    const FlowDeriv k1 = flow_rhs(Gl, pdl, S);
    const FlowDeriv k2 = flow_rhs(Gm, pdm, state_axpy(S, 0.5 * h, k1));
    const FlowDeriv k3 = flow_rhs(Gm, pdm, state_axpy(S, 0.5 * h, k2));
    const FlowDeriv k4 = flow_rhs(Gr, pdr, state_axpy(S, h, k3));

    S = state_axpy(S, h / 6.0, k1);
    S = state_axpy(S, h / 3.0, k2);
    S = state_axpy(S, h / 3.0, k3);
    S = state_axpy(S, h / 6.0, k4);
    Gl = Gr;
    dGl = dGr;
  }
  return S;
}

FlowState flow_with_halving(int K, int base_steps, const GenFn& gen,
                            const GenFn* dgen,
                            std::vector<FlowStepRecord>& trace,
                            bool& converged, std::string& note) {
  int n = std::max(1, base_steps);
  FlowState S = integrate_pair_flow(K, n, gen, dgen);
  converged = false;
  while (2 * n <= kMaxSteps) {
    const FlowState S2 = integrate_pair_flow(K, 2 * n, gen, dgen);
    const double diff = pair_dist(S.fwd, S2.fwd);
    trace.push_back({2 * n, diff});
    S = S2;
    n *= 2;
    if (diff < kFlowTol) {
      converged = true;
      return S;
    }
  }
  std::ostringstream os;
  os << "step halving stalled at " << n << " steps (diff "
     << (trace.empty() ? 0.0 : trace.back().diff) << ")";
  note = os.str();
  return S;
}

FlowResult pack_flow(FlowState&& S, std::vector<FlowStepRecord>&& trace,
                     bool converged, std::string&& note) {
  FlowResult r;
  r.forward = std::move(S.fwd);
  r.inverse = std::move(S.inv);
  r.generator_trace = std::move(trace);
  r.converged = converged;
  r.note = std::move(note);
  return r;
}

//====== generators ==========================================================

// out-diagonal generator: G_PP = 0, G_PM the pair-bank quantization
PairOperator outdiag_generator(const G2Bank& bank, const Field& a,
                               const Field& b, int K) {
  PairOperator G(K);
  G.PM = quantize_bw_hom2(bank, a, b, K);
  return G;
}

G2Bank unit_pair_bank(double alpha, int K) {
  G2Bank bank;
  bank.alpha = alpha;
  bank.K = K;
  bank.Xi = default_Xi(K);
  bank.P.resize(1);
  bank.P[0].resize(2);
  bank.P[0][0] = Vec::Zero(bank.nxi());
  bank.P[0][1] = Vec::Constant(bank.nxi(), I * 0.5);  // b = u u_x pair seed
  return bank;
}

// Transport generator data: real grids of beta and derivatives; the tau-
// dependent symbol is i beta/(1 + tau beta') xi on an M-point x-grid (M
// resolves products of two coefficient fields; Neumann tails alias below
// the flow tolerance at the amplitudes used here).
struct TransportGen {
  Eigen::VectorXd beta, betap, dbeta, dbetap;
  int M = 0, Xi = 0, K = 0;
  bool has_dir = false;

  PairOperator at(double tau) const {
    SymbolGrid g(M, Xi, 1.0);
    for (int m = 0; m < M; ++m) {
      const double den = 1.0 + tau * betap(m);
      const double coef = beta(m) / den;
      for (int h = 0; h < g.nxi(); ++h)
        g.values(m, h) = I * coef * g.xi_at(h);
    }
    PairOperator P(K);
    P.PP = quantize_bw(g, K).matrix;
    return P;
  }
  PairOperator dat(double tau) const {
    SymbolGrid g(M, Xi, 1.0);
    for (int m = 0; m < M; ++m) {
      const double den = 1.0 + tau * betap(m);
      const double num =
          dbeta(m) * den - beta(m) * tau * dbetap(m);
      const double coef = num / (den * den);
      for (int h = 0; h < g.nxi(); ++h)
        g.values(m, h) = I * coef * g.xi_at(h);
    }
    PairOperator P(K);
    P.PP = quantize_bw(g, K).matrix;
    return P;
  }
};

Eigen::VectorXd real_grid(const Field& f, int M) {
  const Vec v = grid_values(f, M);
  return v.real();
}

TransportGen make_transport_gen(const Field& u, double alpha,
                                const Field* direction) {
  TransportGen t;
  t.K = u.K;
  t.M = default_M(2 * u.K);
  t.Xi = default_Xi(u.K);
  const Field b2 = coeffs_beta2(u, alpha);
  t.beta = real_grid(b2, t.M);
  t.betap = real_grid(x_derivative(b2), t.M);
  if ((1.0 + t.betap.array()).minCoeff() <= 0.0)
    throw std::runtime_error(
        "flow_transport: 1 + tau beta' loses positivity (diffeomorphism "
        "breaks)");
  if (direction) {
    t.has_dir = true;
    const Field db = coeffs_beta2_bilinear(*direction, u, alpha) +
                     coeffs_beta2_bilinear(u, *direction, alpha);
    t.dbeta = real_grid(db, t.M);
    t.dbetap = real_grid(x_derivative(db), t.M);
  }
  return t;
}

}  // namespace

//====== public flows ========================================================

FlowResult flow_outdiag(const Field& u, double alpha, double rho,
                        int base_steps) {
  check_alpha(alpha, "flow_outdiag");
  const int K = u.K;
  const G2Bank bank = build_g2(u, alpha, rho).g2;
  const PairOperator G = outdiag_generator(bank, u, u, K);
  GenFn gen = [&G](double) { return G; };
  std::vector<FlowStepRecord> trace;
  bool conv = true;
  std::string note;
  FlowState S = flow_with_halving(K, base_steps, gen, nullptr, trace, conv,
                                  note);
  return pack_flow(std::move(S), std::move(trace), conv, std::move(note));
}

FlowResult flow_transport(const Field& u, double alpha, int base_steps) {
  check_alpha(alpha, "flow_transport");
  const int K = u.K;
  const TransportGen T = make_transport_gen(u, alpha, nullptr);
  GenFn gen = [&T](double tau) { return T.at(tau); };
  std::vector<FlowStepRecord> trace;
  bool conv = true;
  std::string note;
  FlowState S = flow_with_halving(K, base_steps, gen, nullptr, trace, conv,
                                  note);
  return pack_flow(std::move(S), std::move(trace), conv, std::move(note));
}

FlowResult flow_smoothing(const Q2Table& q2, const Field& u, int K,
                          int base_steps) {
  const PairOperator G = q2_generator(q2, u, u, K);
  GenFn gen = [&G](double) { return G; };
  std::vector<FlowStepRecord> trace;
  bool conv = true;
  std::string note;
  FlowState S = flow_with_halving(K, base_steps, gen, nullptr, trace, conv,
                                  note);
  return pack_flow(std::move(S), std::move(trace), conv, std::move(note));
}

//====== composed conjugation ================================================

namespace {

struct StageFlows {
  std::vector<FlowState> stages;  // application order
};

StageFlows build_stages(const ConjugationConfig& cfg, const Field& u,
                        const Field* direction) {
  check_alpha(cfg.alpha, "conjugation_map");
  const int K = u.K;
  StageFlows out;
  auto run = [&](const GenFn& gen, const GenFn* dgen, const char* who) {
    std::vector<FlowStepRecord> trace;
    bool conv = true;
    std::string note;
    FlowState S = flow_with_halving(K, cfg.base_steps, gen, dgen, trace,
                                    conv, note);
    if (!conv)
      throw std::runtime_error(std::string(who) + ": " + note);
    out.stages.push_back(std::move(S));
  };

  {  // out-diagonal stage
    const G2Bank bank = build_g2(u, cfg.alpha, cfg.rho).g2;
    const PairOperator G = outdiag_generator(bank, u, u, K);
    PairOperator dG;
    if (direction)
      dG = pair_add(outdiag_generator(bank, *direction, u, K),
                    outdiag_generator(bank, u, *direction, K));
    GenFn gen = [&G](double) { return G; };
    GenFn dgen = [&dG](double) { return dG; };
    run(gen, direction ? &dgen : nullptr, "conjugation (out-diagonal stage)");
  }
  if (cfg.with_transport) {
    const TransportGen T = make_transport_gen(u, cfg.alpha, direction);
    GenFn gen = [&T](double tau) { return T.at(tau); };
    GenFn dgen = [&T](double tau) { return T.dat(tau); };
    run(gen, direction ? &dgen : nullptr, "conjugation (transport stage)");
  }
  if (cfg.with_smoothing) {
    if (!cfg.q2)
      throw std::invalid_argument(
          "conjugation_map: smoothing stage requires a generator table");
    const PairOperator G = q2_generator(*cfg.q2, u, u, K);
    PairOperator dG;
    if (direction)
      dG = pair_add(q2_generator(*cfg.q2, *direction, u, K),
                    q2_generator(*cfg.q2, u, *direction, K));
    GenFn gen = [&G](double) { return G; };
    GenFn dgen = [&dG](double) { return dG; };
    run(gen, direction ? &dgen : nullptr, "conjugation (smoothing stage)");
  }
  return out;
}

}  // namespace

ConjugationMap conjugation_map(const ConjugationConfig& cfg, const Field& u,
                               const Field* direction) {
  const int K = u.K;
  StageFlows flows = build_stages(cfg, u, direction);
  const int m = static_cast<int>(flows.stages.size());

  // prefix[i] = S_{i-1} o ... o S_0 (identity at i = 0)
  std::vector<PairOperator> prefix(m + 1);
  prefix[0] = pair_identity(K);
  for (int i = 0; i < m; ++i)
    prefix[i + 1] = pair_compose(flows.stages[i].fwd, prefix[i]);

  ConjugationMap out;
  out.F = prefix[m];
  // F^{-1} = S_0^{-1} o S_1^{-1} o ... o S_{m-1}^{-1}
  out.Finv = pair_identity(K);
  for (int i = 0; i < m; ++i)
    out.Finv = pair_compose(out.Finv, flows.stages[i].inv);

  out.dF = PairOperator(K);
  if (direction) {
    // suffix products S_{m-1} o ... o S_{i+1}
    std::vector<PairOperator> suffix(m + 1);
    suffix[m] = pair_identity(K);
    for (int i = m - 1; i >= 0; --i)
      suffix[i] = pair_compose(suffix[i + 1], flows.stages[i].fwd);
    for (int i = 0; i < m; ++i)
      out.dF = pair_add(
          out.dF, pair_compose(suffix[i + 1],
                               pair_compose(flows.stages[i].var, prefix[i])));
  }
  return out;
}

Field conjugation_forward(const ConjugationConfig& cfg, const Field& u) {
  const ConjugationMap M = conjugation_map(cfg, u);
  return pair_apply(M.F, u);
}

Field conjugation_inverse(const ConjugationConfig& cfg, const Field& z,
                          int max_iter, double tol) {
  Field U = z;
  const double scale = 1.0 + sobolev_norm(z, 0.0);
  for (int it = 0;; ++it) {
    const ConjugationMap M = conjugation_map(cfg, U);
    const Field FU = pair_apply(M.F, U);
    if (sobolev_norm(FU - z, 0.0) <= tol * scale) return U;
    if (it >= max_iter)
      throw std::runtime_error(
          "conjugation_inverse: contraction iteration did not reach "
          "tolerance");
    U = (z - FU) + U;  // identity-Jacobian correction step
  }
}

Field conjugated_field(const ConjugationConfig& cfg, const Field& u) {
  const Field V = rhs_renormalized(u, cfg.alpha);
  const ConjugationMap M = conjugation_map(cfg, u, &V);
  return pair_apply(M.F, V) + pair_apply(M.dF, u);
}

Field conjugated_nonlinear(const ConjugationConfig& cfg, const Field& u) {
  const Field V = rhs_renormalized(u, cfg.alpha);
  const ConjugationMap M = conjugation_map(cfg, u, &V);
  const Field XZ = pair_apply(M.F, V) + pair_apply(M.dF, u);
  const Field Z = pair_apply(M.F, u);
  Field out = XZ;
  for (int k = -u.K; k <= u.K; ++k)
    out.c(k + u.K) += I * abs_pow_nf(k, cfg.alpha) * Z.at(k);
  return out;
}

//====== cubic extraction ====================================================

CubicExtraction extract_cubic_field(const std::function<Field(const Field&)>& G,
                                    const std::vector<int>& support, int K,
                                    const std::vector<double>& lambdas) {
  const int ns = static_cast<int>(support.size());
  if (ns < 1 || ns > 4)
    throw std::invalid_argument(
        "extract_cubic_field: support size must be 1..4");
  std::vector<double> lam = lambdas;
  std::sort(lam.begin(), lam.end(), std::greater<double>());
  if (lam.size() < 2 || lam.back() <= 0.0)
    throw std::invalid_argument(
        "extract_cubic_field: need >= 2 positive lambdas");
  const int nl = static_cast<int>(lam.size());

  // amplitude patterns: all-ones, then gamma on one slot at a time
  const double gamma = 0.7;
  std::vector<Eigen::VectorXd> pat(ns, Eigen::VectorXd::Ones(ns));
  for (int p = 1; p < ns; ++p) pat[p](p - 1) = gamma;

  // monomials: two + letters (i <= j), one - letter l over the support
  struct Mono {
    CubicKey key;
    std::array<int, 4> d{};  // degree vector over support slots (size ns)
    int i = 0, j = 0, l = 0;
  };
  std::vector<Mono> monos;
  for (int i = 0; i < ns; ++i)
    for (int j = i; j < ns; ++j)
      for (int l = 0; l < ns; ++l) {
        Mono m;
        m.i = i;
        m.j = j;
        m.l = l;
        const int k = support[i] + support[j] - support[l];
        if (std::abs(k) > K) continue;
        m.key = canonical_cubic_key(
            {support[i], support[j], support[l]}, {+1, +1, -1}, k);
        m.d = {0, 0, 0, 0};
        m.d[i] += 1;
        m.d[j] += 1;
        m.d[l] -= 1;
        monos.push_back(m);
      }

  // phase sweep: values[mono][pattern][lambda]
  const int nphase = static_cast<int>(std::pow(7.0, ns));
  const double w7 = 2.0 * PI / 7.0;
  std::vector<std::vector<std::vector<cplx>>> val(
      monos.size(), std::vector<std::vector<cplx>>(
                        ns, std::vector<cplx>(nl, cplx(0.0, 0.0))));

  std::vector<int> digits(ns, 0);
  for (int p = 0; p < ns; ++p)
    for (int il = 0; il < nl; ++il) {
      std::vector<Field> Y;
      Y.reserve(nphase);
      for (int a = 0; a < nphase; ++a) {
        int rem = a;
        Field W(K);
        for (int mloc = 0; mloc < ns; ++mloc) {
          digits[mloc] = rem % 7;
          rem /= 7;
          W.set(support[mloc],
                lam[il] * pat[p](mloc) * std::polar(1.0, w7 * digits[mloc]));
        }
        Y.push_back(G(W));
      }
      const double lam3 = lam[il] * lam[il] * lam[il];
      for (size_t mi = 0; mi < monos.size(); ++mi) {
        const Mono& m = monos[mi];
        cplx acc = 0.0;
        for (int a = 0; a < nphase; ++a) {
          int rem = a;
          double phase = 0.0;
          for (int mloc = 0; mloc < ns; ++mloc) {
            phase += w7 * (rem % 7) * m.d[mloc];
            rem /= 7;
          }
          acc += Y[a].at(m.key.k) * std::polar(1.0, -phase);
        }
        val[mi][p][il] = acc / (static_cast<double>(nphase) * lam3);
      }
    }

  // Richardson in lambda per (monomial, pattern)
  auto richardson = [&](const std::vector<cplx>& v, int idx) {
    const double r = lam[idx] / lam[idx + 1];
    const double r2 = r * r;
    return (r2 * v[idx + 1] - v[idx]) / (r2 - 1.0);
  };
  std::vector<std::vector<cplx>> rich_last(monos.size(),
                                           std::vector<cplx>(ns));
  std::vector<std::vector<cplx>> rich_prev(monos.size(),
                                           std::vector<cplx>(ns));
  double consistency = 0.0;
  for (size_t mi = 0; mi < monos.size(); ++mi)
    for (int p = 0; p < ns; ++p) {
      rich_last[mi][p] = richardson(val[mi][p], nl - 2);
      rich_prev[mi][p] = (nl >= 3) ? richardson(val[mi][p], nl - 3)
                                   : val[mi][p][nl - 1];
      consistency =
          std::max(consistency, std::abs(rich_last[mi][p] - rich_prev[mi][p]));
    }

  // collision solve on |d| = 1 bins (n_s pair monomials share a bin); the
  // |d| = 3 bins are single monomials read from the all-ones pattern.
  CubicExtraction out;
  out.lambdas = lam;
  out.consistency = consistency;

  Eigen::MatrixXcd A(ns, ns);
  std::map<std::array<int, 4>, std::vector<size_t>> groups;
  for (size_t mi = 0; mi < monos.size(); ++mi)
    groups[monos[mi].d].push_back(mi);
  for (const auto& [d, members] : groups) {
    int d1 = 0;
    for (int x : d) d1 += std::abs(x);
    if (d1 == 3) {
      for (size_t mi : members) out.coeffs[monos[mi].key] += rich_last[mi][0];
      continue;
    }
    // |d| = 1: locate the distinguished slot t, solve the amplitude system
    if (static_cast<int>(members.size()) != ns)
      throw std::logic_error("extract_cubic_field: unexpected collision bin");
    int t = 0;
    for (int x = 0; x < ns; ++x)
      if (d[x] != 0) t = x;
    Eigen::VectorXcd rhs(ns);
    for (int p = 0; p < ns; ++p) {
      for (size_t c = 0; c < members.size(); ++c) {
        const Mono& m = monos[members[c]];
        const int pairslot = (m.i == t) ? m.j : m.i;  // the z_m zbar_m slot
        A(p, static_cast<int>(c)) =
            pat[p](pairslot) * pat[p](pairslot);
      }
      // all members share the same bin value per pattern
      rhs(p) = rich_last[members[0]][p] / pat[p](t);
    }
    const Eigen::VectorXcd sol = A.partialPivLu().solve(rhs);
    for (size_t c = 0; c < members.size(); ++c)
      out.coeffs[monos[members[c]].key] += sol(static_cast<int>(c));
  }

  for (auto it = out.coeffs.begin(); it != out.coeffs.end();)
    it = (std::abs(it->second) <= 1e-14) ? out.coeffs.erase(it)
                                         : std::next(it);
  return out;
}

//====== verification ========================================================

TransportIdentityReport verify_transport_identity(const Field& u,
                                                  double alpha) {
  check_alpha(alpha, "verify_transport_identity");
  Field omu(u.K);
  for (int j = -u.K; j <= u.K; ++j)
    omu.c(j + u.K) = -I * abs_pow_nf(j, alpha) * u.at(j);
  const Field term =
      coeffs_beta2_bilinear(omu, u, alpha) + coeffs_beta2_bilinear(u, omu, alpha);
  const int K2 = 2 * u.K;
  const Field r = resize(term, K2) + resize(coeffs_underlineV(u), K2) -
                  resize(coeffs_resV(u), K2);
  const int P = 4 * K2 + 4;
  const Vec vals = grid_values(r, P);
  TransportIdentityReport rep;
  rep.residual = vals.cwiseAbs().maxCoeff();
  rep.bound = 1e-12 * mass(u);
  rep.pass = rep.residual <= rep.bound;
  return rep;
}

StrongLambdaReport verify_strong_lambda(const CubicCoeffs& conjugated,
                                        double extraction_error,
                                        double alpha) {
  check_alpha(alpha, "verify_strong_lambda");
  // closed form on the all-inside class: -i |z_1|^2 z_1, +i |z_-1|^2 z_-1
  CubicCoeffs expected;
  expected[canonical_cubic_key({1, 1, 1}, {+1, +1, -1}, 1)] = -I;
  expected[canonical_cubic_key({-1, -1, -1}, {+1, +1, -1}, -1)] = I;

  StrongLambdaReport rep;
  rep.extraction_error = extraction_error;
  rep.budget = std::max(1e-7, 10.0 * extraction_error);

  CubicCoeffs p0_seen;
  for (const auto& [key, coef] : conjugated) {
    const IndexTuple t = cubic_key_tuple(key);
    const int n = n_outside_lambda(t);
    if (n == 0)
      p0_seen[key] = coef;
    else if (n == 1)
      rep.p1_residual = std::max(rep.p1_residual, std::abs(coef));
    else if (n == 2)
      rep.p2_residual = std::max(rep.p2_residual, std::abs(coef));
  }
  rep.p0_residual = cubic_dist(p0_seen, expected);
  rep.pass = rep.p0_residual <= rep.budget && rep.p1_residual <= rep.budget &&
             rep.p2_residual <= rep.budget;
  return rep;
}

namespace {

double fit_slope(const std::vector<ShellNorm>& shells) {
  const int n = static_cast<int>(shells.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const ShellNorm& s : shells) {
    const double x = std::log2(s.center);
    const double y = std::log2(std::max(s.norm, 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = n * sxx - sx * sx;
  return (n * sxy - sx * sy) / den;
}

}  // namespace

BlockDiagReport verify_block_diagonalization(
    const Field& u, double alpha, double rho,
    const std::vector<double>& lambdas) {
  check_alpha(alpha, "verify_block_diagonalization");
  if (!(rho > 0.0))
    throw std::invalid_argument("verify_block_diagonalization: rho > 0");
  const int K = u.K;
  std::vector<double> lam = lambdas;
  std::sort(lam.begin(), lam.end(), std::greater<double>());
  if (lam.size() < 2)
    throw std::invalid_argument(
        "verify_block_diagonalization: need >= 2 lambdas");
  lam.erase(lam.begin(), lam.end() - 2);  // Richardson pair: two smallest

  int mmax = 0;
  for (int j = -K; j <= K; ++j)
    if (u.at(j) != cplx(0.0, 0.0)) mmax = std::max(mmax, std::abs(j));
  if (mmax == 0) mmax = 1;

  // interior dyadic shells: start on the cutoff plateau, stop clear of the
  // truncation edge (band width of the pair coefficients)
  std::vector<int> edges;
  const int hi_cap = K - 4 * mmax;
  double e = 20.0 * mmax;
  while (static_cast<int>(std::lround(e)) <= hi_cap) {
    edges.push_back(static_cast<int>(std::lround(e)));
    e *= std::sqrt(2.0);
  }
  if (edges.size() < 3)
    throw std::invalid_argument(
        "verify_block_diagonalization: truncation too small for interior "
        "shells");

  const G2Bank bank = build_g2(u, alpha, rho).g2;
  const G2Bank bbank = unit_pair_bank(alpha, K);
  PairOperator Aop0(K);
  for (int k = -K; k <= K; ++k)
    Aop0.PP(k + K, k + K) = -I * abs_pow_nf(k, alpha);

  std::vector<Mat> Ehat;
  for (double l : lam) {
    const Field v = l * u;
    Field w(K);
    for (int j = -K; j <= K; ++j)
      w.c(j + K) = -I * abs_pow_nf(j, alpha) * v.at(j);

    const PairOperator G = outdiag_generator(bank, v, v, K);
    PairOperator dG = pair_add(outdiag_generator(bank, w, v, K),
                               outdiag_generator(bank, v, w, K));
    GenFn gen = [&G](double) { return G; };
    GenFn dgen = [&dG](double) { return dG; };
    std::vector<FlowStepRecord> trace;
    bool conv = true;
    std::string note;
    FlowState S =
        flow_with_halving(K, 16, gen, &dgen, trace, conv, note);
    if (!conv)
      throw std::runtime_error("verify_block_diagonalization: " + note);

    PairOperator Aop = Aop0;
    Aop.PM = quantize_bw_hom2(bbank, v, v, K);
    const PairOperator E =
        pair_add(pair_compose(S.fwd, pair_compose(Aop, S.inv)),
                 pair_compose(S.var, S.inv));
    Ehat.push_back(E.PM / (l * l));
  }

  // Richardson on the pair removes the quartic contribution
  const double rr = lam[0] / lam[1];
  const Mat A2 = (rr * rr * Ehat[1] - Ehat[0]) / (rr * rr - 1.0);

  // baseline: first-order dressed coefficient b(x) i xi
  const Field b = coeffs_b(u);
  const int M = default_M(2 * K);
  const Vec bg = grid_values(b, M);
  SymbolGrid base(M, default_Xi(K), 1.0);
  for (int m = 0; m < M; ++m)
    for (int h = 0; h < base.nxi(); ++h)
      base.values(m, h) = bg(m) * I * base.xi_at(h);
  const Mat B = quantize_bw(base, K).matrix;

  BlockDiagReport rep;
  rep.rho = rho;
  rep.target = -rho + 0.3;
  for (size_t i = 0; i + 1 < edges.size(); ++i) {
    const int lo = edges[i];
    const int hi = edges[i + 1] - 1;
    const double center = std::sqrt(static_cast<double>(lo) * hi);
    rep.conjugated.push_back({center, op_norm_shell(A2, 0.0, 0.0, lo, hi)});
    rep.baseline.push_back({center, op_norm_shell(B, 0.0, 0.0, lo, hi)});
  }
  double cmax = 0.0;
  for (const ShellNorm& s : rep.conjugated) cmax = std::max(cmax, s.norm);
  if (cmax < 1e-16) {
    rep.slope_conjugated = 0.0;
    rep.slope_baseline = 0.0;
    rep.pass = true;
    return rep;
  }
  rep.slope_conjugated = fit_slope(rep.conjugated);
  rep.slope_baseline = fit_slope(rep.baseline);
  rep.pass = rep.slope_conjugated <= rep.target;
  return rep;
}

//====== reports =============================================================

void dump_decay_csv(const std::vector<ShellNorm>& shells,
                    const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("dump_decay_csv: cannot open " + path);
  os << "shell_center,norm\n";
  os.precision(17);
  for (const ShellNorm& s : shells) os << s.center << "," << s.norm << "\n";
}

nlohmann::json to_json(const TransportIdentityReport& r) {
  return {{"residual", r.residual}, {"bound", r.bound}, {"pass", r.pass}};
}

nlohmann::json to_json(const StrongLambdaReport& r) {
  return {{"p0_residual", r.p0_residual},
          {"p1_residual", r.p1_residual},
          {"p2_residual", r.p2_residual},
          {"extraction_error", r.extraction_error},
          {"budget", r.budget},
          {"pass", r.pass}};
}

nlohmann::json to_json(const BlockDiagReport& r) {
  auto shells = [](const std::vector<ShellNorm>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const ShellNorm& s : v)
      a.push_back({{"shell_center", s.center}, {"norm", s.norm}});
    return a;
  };
  return {{"conjugated", shells(r.conjugated)},
          {"baseline", shells(r.baseline)},
          {"slope_conjugated", r.slope_conjugated},
          {"slope_baseline", r.slope_baseline},
          {"rho", r.rho},
          {"target", r.target},
          {"pass", r.pass}};
}

}  // namespace speclab
