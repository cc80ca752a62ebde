//====== symbols.cpp — symbol constructors and the homological iteration =====

#include "speclab/symbols.hpp"

#include <cmath>
#include <fstream>

namespace speclab {

//====== grid plumbing =======================================================

int default_M(int K) { return 4 * K + 4; }
int default_Xi(int K) { return K + 2; }

int SymbolGrid::h_of(double xi) const {
  const double hd = 2.0 * (xi + Xi);
  const int h = static_cast<int>(std::lround(hd));
  if (std::abs(hd - h) > 1e-9 || h < 0 || h >= nxi())
    throw std::invalid_argument("SymbolGrid::h_of: xi off the lattice");
  return h;
}

int G2Bank::h_of(double xi) const {
  const double hd = 2.0 * (xi + Xi);
  const int h = static_cast<int>(std::lround(hd));
  if (std::abs(hd - h) > 1e-9 || h < 0 || h >= nxi())
    throw std::invalid_argument("G2Bank::h_of: xi off the lattice");
  return h;
}

//====== cutoffs =============================================================

double CutoffFamily::chi(double xi_prime, double xi) const {
  return 1.0 - eta_blend(2.0 * std::abs(xi_prime) / (delta0 * jb(xi)));
}

double CutoffFamily::chi_p(const std::vector<double>& xi_primes,
                           double xi) const {
  double m = 0.0;
  for (double v : xi_primes) m = std::max(m, std::abs(v));
  return chi(m, xi);
}

double chi(double xi_prime, double xi) { return chi_cutoff(xi_prime, xi); }

double chi_p(const std::vector<double>& xi_primes, double xi) {
  return CutoffFamily{}.chi_p(xi_primes, xi);
}

double eta_R(double xi, double R) {
  if (R < 1.0) throw std::invalid_argument("eta_R: R >= 1 required");
  return eta_window(xi, R);
}

//====== x-only symbols ======================================================

SymbolGrid grid_from_field(const Field& f, double order, int M, int Xi) {
  if (M < 2 * f.K + 1)
    throw std::invalid_argument("grid_from_field: M too small for support");
  SymbolGrid a(M, Xi, order);
  Vec vals = grid_values(f, M);
  for (int h = 0; h < a.nxi(); ++h) a.values.col(h) = vals;
  return a;
}

Field coeffs_underlineV(const Field& u) {
  Field w = product(u, conj_field(u));  // coefficients of |u|^2, support 2K
  w.set(0, 0.0);                        // remove the mean (= mass)
  return w;
}

Field coeffs_underlined(const Field& u) {
  // Im(u_x conj u): c_m = (w_m - conj(w_{-m})) / 2i with w = coeffs(u_x conj u);
  // the mean (m = 0) is removed.
  Field w = product(x_derivative(u), conj_field(u));
  Field c(w.K);
  for (int m = -w.K; m <= w.K; ++m) {
    if (m == 0) continue;
    c.set(m, (w.at(m) - std::conj(w.at(-m))) / (2.0 * I));
  }
  return c;
}

Field coeffs_b(const Field& u) { return product(u, x_derivative(u)); }

Field coeffs_resV(const Field& z) {
  Field c(2 * z.K);
  for (int n = 1; n <= z.K; ++n) {
    const cplx w = z.at(n) * std::conj(z.at(-n));
    if (w == cplx(0.0, 0.0)) continue;
    c.c(2 * n + c.K) += w;
    c.c(-2 * n + c.K) += std::conj(w);
  }
  return c;
}

Field coeffs_beta2_bilinear(const Field& a, const Field& b, double alpha) {
  const int K = std::max(a.K, b.K);
  Field c(2 * K);
  for (int j1 = -a.K; j1 <= a.K; ++j1) {
    if (a.at(j1) == cplx(0.0, 0.0)) continue;
    for (int j2 = -b.K; j2 <= b.K; ++j2) {
      if (std::abs(j1) == std::abs(j2)) continue;
      const cplx num = a.at(j1) * std::conj(b.at(j2));
      if (num == cplx(0.0, 0.0)) continue;
      const double div = abs_pow(j1, alpha) - abs_pow(j2, alpha);
      c.c(j1 - j2 + c.K) += num / (I * div);
    }
  }
  return c;
}

Field coeffs_beta2(const Field& u, double alpha) {
  return coeffs_beta2_bilinear(u, u, alpha);
}

namespace {

SymbolGrid xonly(const Field& f, const Field& u, int M, int Xi) {
  if (M < 0) M = default_M(u.K);
  if (Xi < 0) Xi = default_Xi(u.K);
  return grid_from_field(f, 0.0, M, Xi);
}

}  // namespace

SymbolGrid sym_underlineV(const Field& u, int M, int Xi) {
  return xonly(coeffs_underlineV(u), u, M, Xi);
}

SymbolGrid sym_underlined(const Field& u, int M, int Xi) {
  return xonly(coeffs_underlined(u), u, M, Xi);
}

SymbolGrid sym_b(const Field& u, int M, int Xi) {
  return xonly(coeffs_b(u), u, M, Xi);
}

SymbolGrid sym_resV(const Field& z, int M, int Xi) {
  return xonly(coeffs_resV(z), z, M, Xi);
}

SymbolGrid sym_beta2(const Field& u, double alpha, int M, int Xi) {
  return xonly(coeffs_beta2(u, alpha), u, M, Xi);
}

//====== homological iteration on the pair bank ==============================

namespace {

// Ensure P[d][r] exists (zero-initialized).
void ensure(G2Bank& b, int d, int r) {
  if (static_cast<int>(b.P.size()) <= d) b.P.resize(d + 1);
  auto& row = b.P[static_cast<size_t>(d)];
  while (static_cast<int>(row.size()) <= r)
    row.push_back(Vec::Zero(b.nxi()));
}

// Solve 2i|xi|^a g = -N pointwise on the lattice; the value at xi = 0 is 0
// (the quantization cutoff vanishes there for every nonzero pair).
G2Bank solve_divide(const G2Bank& N) {
  G2Bank g = N;
  for (auto& row : g.P)
    for (auto& pv : row)
      for (int h = 0; h < g.nxi(); ++h) {
        const double xi = g.xi_at(h);
        pv(h) = (xi == 0.0)
                    ? cplx(0.0, 0.0)
                    : -pv(h) / (2.0 * I * abs_pow(xi, g.alpha));
      }
  return g;
}

// i r[g] - i f[g]:
//   f[g] multiplies each pair coefficient by w = |j1|^a + |j2|^a  (d -> d+1);
//   r[g] = sum over even l, 2 <= l <= rho, of (2 * 2^-l / l!) (D_x^l g)
//          (d^l/dxi^l |xi|^a), and D_x^l acts on pairs as m^l  (r -> r+l).
G2Bank next_numerator(const G2Bank& g, double rho) {
  G2Bank N;
  N.alpha = g.alpha;
  N.K = g.K;
  N.Xi = g.Xi;
  for (int d = 0; d < static_cast<int>(g.P.size()); ++d)
    for (int r = 0; r < static_cast<int>(g.P[d].size()); ++r) {
      const Vec& pv = g.P[d][r];
      if (pv.isZero(0.0)) continue;
      // -i f[g]
      ensure(N, d + 1, r);
      N.P[d + 1][r] += (-I) * pv;
      // +i r[g]
      double lfact = 1.0;
      for (int l = 1; l <= static_cast<int>(std::floor(rho + 1e-9)); ++l) {
        lfact *= l;
        if (l % 2 != 0 || l < 2) continue;
        const double coef = 2.0 * std::pow(2.0, -l) / lfact;
        ensure(N, d, r + l);
        for (int h = 0; h < N.nxi(); ++h)
          N.P[d][r + l](h) +=
              I * coef * abs_pow_deriv(N.xi_at(h), N.alpha, l) * pv(h);
      }
    }
  return N;
}

void accumulate(G2Bank& acc, const G2Bank& g) {
  for (int d = 0; d < static_cast<int>(g.P.size()); ++d)
    for (int r = 0; r < static_cast<int>(g.P[d].size()); ++r) {
      ensure(acc, d, r);
      acc.P[d][r] += g.P[d][r];
    }
}

}  // namespace

cplx G2Bank::pair_coeff(int j1, int j2, int h) const {
  const double m = j1 + j2;
  const double w = abs_pow(j1, alpha) + abs_pow(j2, alpha);
  cplx acc = 0.0;
  for (int d = 0; d < static_cast<int>(P.size()); ++d) {
    const double wd = std::pow(w, d);
    for (int r = 0; r < static_cast<int>(P[d].size()); ++r) {
      const cplx pv = P[d][r](h);
      if (pv == cplx(0.0, 0.0)) continue;
      acc += pv * std::pow(m, r) * wd;
    }
  }
  return acc;
}

G2Result build_g2(const Field& u, double alpha, double rho, int Xi) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("build_g2: alpha in (0,1) required");
  if (!(rho > 0.0)) throw std::invalid_argument("build_g2: rho > 0 required");
  if (Xi < 0) Xi = default_Xi(u.K);

  const int p = std::max(1, static_cast<int>(std::ceil(rho / alpha - 1e-9)));

  // seed: b = u u_x has symmetrized pair coefficient (i/2) m  (d=0, r=1)
  G2Bank seed;
  seed.alpha = alpha;
  seed.K = u.K;
  seed.Xi = Xi;
  ensure(seed, 0, 1);
  seed.P[0][1] = Vec::Constant(seed.nxi(), I * 0.5);

  G2Result out;
  out.p = p;
  G2Bank g_curr = solve_divide(seed);  // g^{(1)} = -b / (2i|xi|^a)
  out.g2 = g_curr;
  for (int l = 2; l <= p; ++l) {
    g_curr = solve_divide(next_numerator(g_curr, rho));
    accumulate(out.g2, g_curr);
  }
  out.residual = next_numerator(g_curr, rho);
  return out;
}

SymbolGrid bank_to_grid(const G2Bank& bank, const Field& u, double order,
                        int M) {
  if (M < 0) M = default_M(u.K);
  if (M < 4 * u.K + 1)
    throw std::invalid_argument("bank_to_grid: M too small for pair support");
  const int K = u.K;
  const int dmax = static_cast<int>(bank.P.size());

  // H_d(m) = sum_{j1+j2=m} (|j1|^a + |j2|^a)^d u_{j1} u_{j2}
  std::vector<Vec> H(dmax, Vec::Zero(4 * K + 1));
  for (int j1 = -K; j1 <= K; ++j1) {
    if (u.at(j1) == cplx(0.0, 0.0)) continue;
    for (int j2 = -K; j2 <= K; ++j2) {
      const cplx pr = u.at(j1) * u.at(j2);
      if (pr == cplx(0.0, 0.0)) continue;
      const double w = abs_pow(j1, bank.alpha) + abs_pow(j2, bank.alpha);
      double wd = 1.0;
      for (int d = 0; d < dmax; ++d) {
        H[d](j1 + j2 + 2 * K) += wd * pr;
        wd *= w;
      }
    }
  }

  SymbolGrid a(M, bank.Xi, order);
  for (int d = 0; d < dmax; ++d)
    for (int r = 0; r < static_cast<int>(bank.P[d].size()); ++r) {
      const Vec& pv = bank.P[d][r];
      if (pv.isZero(0.0)) continue;
      Vec bins = Vec::Zero(M);
      for (int m = -2 * K; m <= 2 * K; ++m)
        bins(((m % M) + M) % M) += std::pow(double(m), r) * H[d](m + 2 * K);
      Vec W = idft_values(bins);
      a.values += W * pv.transpose();
    }
  return a;
}

std::pair<SymbolGrid, SymbolGrid> sym_g2(const Field& u, double alpha,
                                         double rho, int M, int Xi) {
  G2Result r = build_g2(u, alpha, rho, Xi);
  SymbolGrid g2 = bank_to_grid(r.g2, u, -alpha, M);
  SymbolGrid res = bank_to_grid(r.residual, u, -r.p * alpha, M);
  return {std::move(g2), std::move(res)};
}

//====== escape-function symbols and effective constants =====================

SymbolGrid sym_fa(double s, double R, cplx z1, cplx zm1, int M, int Xi) {
  if (R < 1.0) throw std::invalid_argument("sym_fa: R >= 1 required");
  if (!(s > 1.0)) throw std::invalid_argument("sym_fa: s > 1 required");
  if (M < 0) M = 16;
  if (Xi < 0) Xi = static_cast<int>(std::ceil(3.0 * R)) + 2;
  SymbolGrid a(M, Xi, 2.0 * s);
  const cplx w0 = z1 * std::conj(zm1);
  for (int m = 0; m < M; ++m) {
    const double t = -std::imag(w0 * std::exp(I * (2.0 * a.x_at(m))));
    for (int h = 0; h < a.nxi(); ++h) {
      const double xi = a.xi_at(h);
      const double win = eta_window(xi, R);
      if (win == 0.0) continue;
      a.values(m, h) = t * std::pow(std::abs(xi), 2.0 * s) * win * win;
    }
  }
  return a;
}

std::pair<double, double> constants_J1_I1(cplx z1, cplx zm1) {
  const double J1 = 0.5 * (std::norm(z1) + std::norm(zm1));
  const double q = 2.0 * std::abs(z1) * std::abs(zm1);
  return {J1, q * (q - J1)};
}

SymbolGrid sym_fv(cplx z1, cplx zm1, int M, int Xi) {
  if (M < 0) M = 16;
  if (Xi < 0) Xi = 4;
  SymbolGrid a(M, Xi, 0.0);
  const cplx w0 = z1 * std::conj(zm1);
  for (int m = 0; m < M; ++m) {
    const double v = 2.0 * std::real(w0 * std::exp(I * (2.0 * a.x_at(m))));
    for (int h = 0; h < a.nxi(); ++h) a.values(m, h) = v;
  }
  return a;
}

//====== diagnostics and dumps ===============================================

double max_abs(const SymbolGrid& a) { return a.values.cwiseAbs().maxCoeff(); }

double max_imag(const SymbolGrid& a) {
  return a.values.imag().cwiseAbs().maxCoeff();
}

double mean_abs_over_max(const SymbolGrid& a) {
  const double mx = max_abs(a);
  if (mx == 0.0) return 0.0;
  double worst = 0.0;
  for (int h = 0; h < a.nxi(); ++h)
    worst = std::max(worst, std::abs(a.values.col(h).mean()));
  return worst / mx;
}

void dump_symbol_csv(const SymbolGrid& a, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("dump_symbol_csv: cannot open " + path);
  out << "x_index,xi_times_2,re,im\n";
  for (int m = 0; m < a.M; ++m)
    for (int h = 0; h < a.nxi(); ++h)
      out << m << "," << (-2 * a.Xi + h) << "," << fmt17(a.values(m, h).real())
          << "," << fmt17(a.values(m, h).imag()) << "\n";
}

}  // namespace speclab
