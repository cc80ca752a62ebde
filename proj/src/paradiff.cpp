//====== paradiff.cpp — quantization and the finite symbol calculus ==========

#include "speclab/paradiff.hpp"

#include <fstream>

namespace speclab {

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::QuantizedSymbol: return "quantized symbol";
    case Provenance::Commutator: return "commutator";
    case Provenance::Flow: return "flow";
    case Provenance::Composition: return "composition";
  }
  return "?";
}

Field apply_matrix(const Mat& A, const Field& u) {
  const int K = (static_cast<int>(A.rows()) - 1) / 2;
  Field r(K);
  r.c = A * resize(u, K).c;
  return r;
}

Field apply(const ParaOperator& A, const Field& u) {
  return apply_matrix(A.matrix, u);
}

//====== quantization ========================================================

namespace {

// Spatial DFT of every xi column: hat(m_bin, h).
Mat spatial_hat(const SymbolGrid& a) {
  Mat hat(a.M, a.nxi());
  for (int h = 0; h < a.nxi(); ++h) hat.col(h) = dft_coeffs(a.values.col(h));
  return hat;
}

ParaOperator quantize(const SymbolGrid& a, int K, bool with_cutoff) {
  if (K < 0) K = a.Xi - 2;
  if (K < 0) throw std::invalid_argument("quantize: lattice too small");
  if (a.Xi < K)
    throw std::invalid_argument("quantize: Xi >= K required");
  if (a.M < 4 * K + 2)
    throw std::invalid_argument("quantize: M >= 4K+2 required");
  Mat hat = spatial_hat(a);
  ParaOperator op;
  op.matrix = Mat::Zero(2 * K + 1, 2 * K + 1);
  op.order = a.order;
  op.provenance = Provenance::QuantizedSymbol;
  for (int k = -K; k <= K; ++k)
    for (int j = -K; j <= K; ++j) {
      const int m = k - j;
      const double xi = 0.5 * (k + j);
      const double cut = with_cutoff ? chi_cutoff(m, xi) : 1.0;
      if (cut == 0.0) continue;
      const int h = 2 * a.Xi + k + j;  // lattice index of (k+j)/2
      const cplx av = hat(((m % a.M) + a.M) % a.M, h);
      op.matrix(k + K, j + K) = cut * av;
    }
  return op;
}

}  // namespace

ParaOperator quantize_bw(const SymbolGrid& a, int K) {
  return quantize(a, K, true);
}

ParaOperator quantize_weyl(const SymbolGrid& a, int K) {
  return quantize(a, K, false);
}

Mat quantize_bw_hom2(const G2Bank& bank, const Field& ua, const Field& ub,
                     int K) {
  if (bank.Xi < K)
    throw std::invalid_argument("quantize_bw_hom2: Xi >= K required");
  Mat A = Mat::Zero(2 * K + 1, 2 * K + 1);
  const int Ku = std::max(ua.K, ub.K);
  for (int k = -K; k <= K; ++k)
    for (int j = -K; j <= K; ++j) {
      const int m = k - j;
      if (std::abs(m) > 2 * Ku) continue;
      const double xi = 0.5 * (k + j);
      const int h = 2 * bank.Xi + k + j;
      cplx acc = 0.0;
      for (int j1 = std::max(-ua.K, m - ub.K);
           j1 <= std::min(ua.K, m + ub.K); ++j1) {
        const int j2 = m - j1;
        const cplx pr = ua.at(j1) * ub.at(j2);
        if (pr == cplx(0.0, 0.0)) continue;
        const double cut =
            chi_hom(std::max(std::abs(j1), std::abs(j2)), xi);
        if (cut == 0.0) continue;
        acc += cut * bank.pair_coeff(j1, j2, h) * pr;
      }
      A(k + K, j + K) = acc;
    }
  return A;
}

//====== symbol calculus =====================================================

SymbolGrid deriv_x(const SymbolGrid& a) {
  SymbolGrid d(a.M, a.Xi, a.order);
  for (int h = 0; h < a.nxi(); ++h) {
    Vec bins = dft_coeffs(a.values.col(h));
    for (int b = 0; b < a.M; ++b) {
      const int m = (b <= a.M / 2) ? b : b - a.M;  // signed frequency
      bins(b) *= I * static_cast<double>(m);
    }
    d.values.col(h) = idft_values(bins);
  }
  return d;
}

SymbolGrid deriv_Dx(const SymbolGrid& a) {
  SymbolGrid d = deriv_x(a);
  d.values *= -I;  // (1/i) d/dx
  return d;
}

SymbolGrid deriv_xi(const SymbolGrid& a) {
  SymbolGrid d(a.M, a.Xi, a.order - 1.0);
  const int n = a.nxi();
  for (int h = 0; h < n; ++h) {
    if (h == 0)
      d.values.col(h) = (a.values.col(1) - a.values.col(0)) / 0.5;
    else if (h == n - 1)
      d.values.col(h) = (a.values.col(n - 1) - a.values.col(n - 2)) / 0.5;
    else
      d.values.col(h) = (a.values.col(h + 1) - a.values.col(h - 1)) / 1.0;
  }
  return d;
}

SymbolGrid compose_expansion(const SymbolGrid& a, const SymbolGrid& b,
                             int rho) {
  if (a.M != b.M || a.Xi != b.Xi)
    throw std::invalid_argument("compose_expansion: common lattice required");
  if (rho < 0) throw std::invalid_argument("compose_expansion: rho >= 0");

  // mixed derivatives dxi^l Dx^beta up to total order rho
  auto table = [&](const SymbolGrid& s) {
    std::vector<std::vector<SymbolGrid>> t(rho + 1);
    t[0].push_back(s);
    for (int beta = 1; beta <= rho; ++beta)
      t[0].push_back(deriv_Dx(t[0][beta - 1]));
    for (int l = 1; l <= rho; ++l) {
      t[l].reserve(rho + 1 - l);
      for (int beta = 0; beta + l <= rho; ++beta)
        t[l].push_back(deriv_xi(t[l - 1][beta]));
    }
    return t;
  };
  auto ta = table(a);
  auto tb = table(b);

  SymbolGrid out(a.M, a.Xi, a.order + b.order);
  for (int k = 0; k <= rho; ++k)
    for (int l = 0; l <= k; ++l) {
      const int beta = k - l;
      double lf = 1.0, bf = 1.0;
      for (int q = 2; q <= l; ++q) lf *= q;
      for (int q = 2; q <= beta; ++q) bf *= q;
      const double sign = (beta % 2 == 0) ? 1.0 : -1.0;
      const double coef = std::pow(2.0, -k) * sign / (lf * bf);
      out.values += coef * ta[l][beta].values.cwiseProduct(tb[beta][l].values);
    }
  return out;
}

SymbolGrid poisson_bracket(const SymbolGrid& a, const SymbolGrid& b) {
  if (a.M != b.M || a.Xi != b.Xi)
    throw std::invalid_argument("poisson_bracket: common lattice required");
  SymbolGrid out(a.M, a.Xi, a.order + b.order - 1.0);
  out.values = deriv_xi(a).values.cwiseProduct(deriv_x(b).values) -
               deriv_x(a).values.cwiseProduct(deriv_xi(b).values);
  return out;
}

//====== norms and spectra ===================================================

namespace {

double largest_singular(const Mat& B) {
  const int n = static_cast<int>(B.cols());
  Mat N = B.adjoint() * B;
  Vec v(n);
  for (int i = 0; i < n; ++i)
    v(i) = cplx(1.0 + 0.3 * std::sin(1.7 * i), 0.1 * std::cos(2.3 * i));
  v.normalize();
  double lam = 0.0;
  for (int it = 0; it < 1000; ++it) {
    Vec w = N * v;
    const double nl = w.norm();
    if (nl == 0.0) return 0.0;
    w /= nl;
    if (it > 3 && std::abs(nl - lam) <= 1e-12 * std::max(1.0, nl)) {
      lam = nl;
      break;
    }
    lam = nl;
    v = w;
  }
  return std::sqrt(lam);
}

RVec bracket_weights(int K, double s) {
  RVec d(2 * K + 1);
  for (int k = -K; k <= K; ++k) d(k + K) = std::pow(jb(k), s);
  return d;
}

}  // namespace

double op_norm(const Mat& A, double s_from, double s_to) {
  const int K = (static_cast<int>(A.rows()) - 1) / 2;
  RVec wt = bracket_weights(K, s_to);
  RVec wf = bracket_weights(K, -s_from);
  Mat B = wt.asDiagonal() * A * wf.asDiagonal();
  return largest_singular(B);
}

double op_norm_shell(const Mat& A, double s_from, double s_to, int jmin,
                     int jmax) {
  const int K = (static_cast<int>(A.rows()) - 1) / 2;
  Mat P = A;
  for (int j = -K; j <= K; ++j)
    if (std::abs(j) < jmin || std::abs(j) > jmax) P.col(j + K).setZero();
  return op_norm(P, s_from, s_to);
}

double min_eig_herm(const Mat& A) {
  Mat H = 0.5 * (A + A.adjoint());
  Eigen::SelfAdjointEigenSolver<Mat> es(H, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

//====== remainder and Garding ===============================================

double remainder_norm(const SymbolGrid& a, const SymbolGrid& b, int rho,
                      double s, int jmin, int jmax) {
  ParaOperator A = quantize_bw(a);
  ParaOperator B = quantize_bw(b);
  ParaOperator C = quantize_bw(compose_expansion(a, b, rho));
  Mat E = A.matrix * B.matrix - C.matrix;
  const double s_to = s - (a.order + b.order) + rho;
  if (jmin < 0) return op_norm(E, s, s_to);
  return op_norm_shell(E, s, s_to, jmin, jmax);
}

GardingResult garding_check(const SymbolGrid& a_func, const SymbolGrid& psi,
                            double R, double s) {
  if (a_func.values.real().minCoeff() < -1e-13)
    throw std::invalid_argument("garding_check: a_func must be nonnegative");
  if (a_func.M != psi.M || a_func.Xi != psi.Xi)
    throw std::invalid_argument("garding_check: common lattice required");

  SymbolGrid prod(a_func.M, a_func.Xi, a_func.order + 2.0 * psi.order);
  prod.values = a_func.values.cwiseProduct(psi.values.cwiseProduct(psi.values));
  ParaOperator A = quantize_bw(prod);
  const int K = A.K();

  RVec w = bracket_weights(K, -s);
  Mat B = w.asDiagonal() * A.matrix * w.asDiagonal();
  GardingResult r;
  r.min_quadform = min_eig_herm(B);

  // sampled W^{3,inf} norm of a(x): max over x of |a|, |a'|, |a''|, |a'''|
  double wnorm = a_func.values.cwiseAbs().maxCoeff();
  SymbolGrid d = a_func;
  for (int n = 0; n < 3; ++n) {
    d = deriv_x(d);
    wnorm = std::max(wnorm, d.values.cwiseAbs().maxCoeff());
  }
  r.bound = -100.0 * wnorm / (R * R);
  r.c_measured =
      (r.min_quadform < 0.0 && wnorm > 0.0)
          ? -r.min_quadform * R * R / wnorm
          : 0.0;
  return r;
}

//====== structure checks ====================================================

Mat reflconj(const Mat& A) {
  const int n = static_cast<int>(A.rows());
  Mat B(n, A.cols());
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < A.cols(); ++c)
      B(r, c) = std::conj(A(n - 1 - r, A.cols() - 1 - c));
  return B;
}

RealityDiagnostics reality_and_adjoint_checks(const SymbolGrid& a) {
  ParaOperator A = quantize_bw(a);

  // conj(a(x,-xi)): xi column h -> nxi-1-h, conjugated values
  SymbolGrid rc(a.M, a.Xi, a.order);
  for (int h = 0; h < a.nxi(); ++h)
    rc.values.col(h) = a.values.col(a.nxi() - 1 - h).conjugate();
  // conj(a(x,xi))
  SymbolGrid cc(a.M, a.Xi, a.order);
  cc.values = a.values.conjugate();

  RealityDiagnostics d;
  d.conj_dev =
      (reflconj(A.matrix) - quantize_bw(rc).matrix).cwiseAbs().maxCoeff();
  d.adjoint_dev =
      (A.matrix.adjoint() - quantize_bw(cc).matrix).cwiseAbs().maxCoeff();
  return d;
}

//====== dumps ===============================================================

void dump_operator_csv(const Mat& A, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("dump_operator_csv: cannot open " + path);
  const int K = (static_cast<int>(A.rows()) - 1) / 2;
  out << "k,j,re,im\n";
  for (int k = -K; k <= K; ++k)
    for (int j = -K; j <= K; ++j) {
      const cplx v = A(k + K, j + K);
      if (v == cplx(0.0, 0.0)) continue;
      out << k << "," << j << "," << fmt17(v.real()) << "," << fmt17(v.imag())
          << "\n";
    }
}

}  // namespace speclab
