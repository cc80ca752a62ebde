//====== resonance.cpp =======================================================

#include "speclab/resonance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>
#include <vector>

#include <boost/multiprecision/cpp_dec_float.hpp>

namespace speclab {

using dec50 = boost::multiprecision::cpp_dec_float_50;

// All six sign vectors with exactly two +.
static const std::array<std::array<int, 4>, 6> kSignPatterns = {{
    {+1, +1, -1, -1},
    {+1, -1, +1, -1},
    {+1, -1, -1, +1},
    {-1, +1, +1, -1},
    {-1, +1, -1, +1},
    {-1, -1, +1, +1},
}};

//====== enumeration =========================================================

void enumerate_P4(int J, const std::function<void(const IndexTuple&)>& visit) {
  if (J < 1) throw std::invalid_argument("enumerate_P4: J >= 1 required");
  for (const auto& s : kSignPatterns) {
    for (int j1 = -J; j1 <= J; ++j1) {
      const int s1 = s[0] * j1;
      for (int j2 = -J; j2 <= J; ++j2) {
        const int s12 = s1 + s[1] * j2;
        for (int j3 = -J; j3 <= J; ++j3) {
          const int j4 = -s[3] * (s12 + s[2] * j3);
          if (j4 < -J || j4 > J) continue;
          visit(IndexTuple{{j1, j2, j3, j4}, s});
        }
      }
    }
  }
}

//====== classification ======================================================

double omega_sum(const IndexTuple& t, double alpha) {
  double w = 0.0;
  for (int a = 0; a < 4; ++a)
    w += t.sigma[a] * abs_pow(static_cast<double>(t.j[a]), alpha);
  return w;
}

int n_outside_lambda(const IndexTuple& t) {
  int n = 0;
  for (int a = 0; a < 4; ++a) n += (std::abs(t.j[a]) != 1) ? 1 : 0;
  return n;
}

ResonanceTag classify(const IndexTuple& t, double alpha) {
  ResonanceTag tag;
  tag.n_outside = n_outside_lambda(t);
  switch (tag.n_outside) {
    case 0:
      tag.resonant = true;
      break;
    case 1:
      tag.resonant = false;
      break;
    case 2: {
      int a = -1, b = -1;
      for (int i = 0; i < 4; ++i)
        if (std::abs(t.j[i]) != 1) (a < 0 ? a : b) = i;
      tag.resonant =
          std::abs(t.j[a]) == std::abs(t.j[b]) && t.sigma[a] != t.sigma[b];
      break;
    }
    default:
      tag.resonant = std::abs(omega_sum(t, alpha)) <= kResonanceTol;
      break;
  }
  return tag;
}

bool resonant_hp(const IndexTuple& t, double alpha) {
  const dec50 a(alpha);
  dec50 w(0);
  for (int i = 0; i < 4; ++i) {
    const int m = std::abs(t.j[i]);
    if (m != 0) w += t.sigma[i] * boost::multiprecision::pow(dec50(m), a);
  }
  return boost::multiprecision::abs(w) < dec50("1e-40");
}

//====== audit ===============================================================

namespace {

void merge_min(AuditClassBound& into, const AuditClassBound& from) {
  if (!from.attained) return;
  if (!into.attained || from.value < into.value) into = from;
}

void audit_range(int J, double alpha, int j1_lo, int j1_hi,
                 const std::vector<double>& pa, const std::vector<double>& qa,
                 const std::vector<dec50>& pa50, AuditReport& out) {
  const dec50 hp_tol("1e-40");
  for (const auto& s : kSignPatterns) {
    for (int j1 = j1_lo; j1 < j1_hi; ++j1) {
      const int m1 = std::abs(j1);
      const int p1 = s[0] * j1;
      for (int j2 = -J; j2 <= J; ++j2) {
        const int m2 = std::abs(j2);
        const int p12 = p1 + s[1] * j2;
        const int n12 = (m1 != 1) + (m2 != 1);
        const double w12 = s[0] * pa[m1] + s[1] * pa[m2];
        for (int j3 = -J; j3 <= J; ++j3) {
          const int j4 = -s[3] * (p12 + s[2] * j3);
          if (j4 < -J || j4 > J) continue;
          const int m3 = std::abs(j3);
          const int m4 = std::abs(j4);
          const int n = n12 + (m3 != 1) + (m4 != 1);
          ++out.count_by_n[n];
          if (n == 0) continue;
          const double w = w12 + s[2] * pa[m3] + s[3] * pa[m4];
          const double aw = std::abs(w);
          const IndexTuple t{{j1, j2, j3, j4}, s};
          if (n == 1) {
            if (aw <= kResonanceTol) out.S1_empty = false;
            merge_min(out.min_abs_omega_P1, {aw, t, true});
          } else if (n == 2) {
            int a = -1, b = -1;
            for (int i = 0; i < 4; ++i)
              if (std::abs(t.j[i]) != 1) (a < 0 ? a : b) = i;
            const bool res = std::abs(t.j[a]) == std::abs(t.j[b]) &&
                             t.sigma[a] != t.sigma[b];
            if (res != (aw <= kResonanceTol)) ++out.n2_structural_mismatch;
            if (!res) {
              const int mx = std::max(std::max(m1, m2), std::max(m3, m4));
              merge_min(out.min_weighted_P2, {aw * qa[mx], t, true});
            }
          } else if (aw <= kResonanceTol) {
            ++out.hp_candidates;
            dec50 w50(0);
            if (m1 != 0) w50 += s[0] * pa50[m1];
            if (m2 != 0) w50 += s[1] * pa50[m2];
            if (m3 != 0) w50 += s[2] * pa50[m3];
            if (m4 != 0) w50 += s[3] * pa50[m4];
            if (boost::multiprecision::abs(w50) < hp_tol)
              ++out.hp_confirmed_zero;
            else
              ++out.hp_rejected;
          }
        }
      }
    }
  }
}

}  // namespace

AuditReport audit_lower_bounds(int J, double alpha, int threads) {
  if (J < 3) throw std::invalid_argument("audit_lower_bounds: J >= 3");
  if (alpha <= 0.0 || alpha >= 1.0)
    throw std::invalid_argument("audit_lower_bounds: alpha in (0,1)");
  std::vector<double> pa(J + 1), qa(J + 1);
  std::vector<dec50> pa50(J + 1);
  for (int m = 0; m <= J; ++m) {
    pa[m] = (m == 0) ? 0.0 : std::pow(static_cast<double>(m), alpha);
    qa[m] = (m == 0) ? 0.0 : std::pow(static_cast<double>(m), 1.0 - alpha);
    pa50[m] = (m == 0) ? dec50(0)
                       : boost::multiprecision::pow(dec50(m), dec50(alpha));
  }

  AuditReport total;
  total.J = J;
  total.alpha = alpha;
  total.lemma_bound_P1 = std::pow(2.0, alpha) - 1.0;

  const int nt = std::max(1, std::min(threads, 2 * J + 1));
  if (nt == 1) {
    audit_range(J, alpha, -J, J + 1, pa, qa, pa50, total);
    return total;
  }
  std::vector<AuditReport> parts(nt);
  std::vector<std::thread> pool;
  const int span = (2 * J + 1 + nt - 1) / nt;
  for (int i = 0; i < nt; ++i) {
    const int lo = -J + i * span;
    const int hi = std::min(J + 1, lo + span);
    if (lo >= hi) continue;
    pool.emplace_back([&, lo, hi, i] {
      audit_range(J, alpha, lo, hi, pa, qa, pa50, parts[i]);
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& p : parts) {
    merge_min(total.min_abs_omega_P1, p.min_abs_omega_P1);
    merge_min(total.min_weighted_P2, p.min_weighted_P2);
    total.S1_empty = total.S1_empty && p.S1_empty;
    for (int n = 0; n < 5; ++n) total.count_by_n[n] += p.count_by_n[n];
    total.n2_structural_mismatch += p.n2_structural_mismatch;
    total.hp_candidates += p.hp_candidates;
    total.hp_confirmed_zero += p.hp_confirmed_zero;
    total.hp_rejected += p.hp_rejected;
  }
  return total;
}

static nlohmann::json tuple_json(const IndexTuple& t) {
  return nlohmann::json{{"j", t.j}, {"sigma", t.sigma}};
}

nlohmann::json to_json(const AuditReport& r) {
  nlohmann::json out;
  out["J"] = r.J;
  out["alpha"] = r.alpha;
  out["min_bounds"] = {
      {"P1_abs_omega", r.min_abs_omega_P1.value},
      {"P1_lemma_constant", r.lemma_bound_P1},
      {"P2_weighted", r.min_weighted_P2.value},
  };
  out["attaining"] = {
      {"P1", tuple_json(r.min_abs_omega_P1.attaining)},
      {"P2", tuple_json(r.min_weighted_P2.attaining)},
  };
  out["S1_empty"] = r.S1_empty;
  out["counts"] = {
      {"by_n_outside", r.count_by_n},
      {"n2_structural_mismatch", r.n2_structural_mismatch},
      {"hp_candidates", r.hp_candidates},
      {"hp_confirmed_zero", r.hp_confirmed_zero},
      {"hp_rejected", r.hp_rejected},
  };
  return out;
}

//====== cubic tables ========================================================

cplx x3_coefficients(const std::array<int, 3>& j, int k,
                     const std::array<int, 3>& sig, int sig_out) {
  (void)k;  // output mode implied by momentum; kept for call-site clarity
  const int plus = (sig[0] == 1) + (sig[1] == 1) + (sig[2] == 1);
  if (sig_out == 1) {
    if (plus != 2) return cplx(0.0, 0.0);
    int b = -1;
    for (int i = 0; i < 3; ++i)
      if (sig[i] == -1) b = i;
    const int a = (b == 0) ? 1 : 0;
    const int c = (b == 2) ? 1 : 2;
    const double ja = j[a], jb = j[b], jc = j[c];
    const bool ab = (j[a] == j[b]), cb = (j[c] == j[b]);
    const double val =
        (jc * (ab ? 0.0 : 1.0) + ja * (cb ? 0.0 : 1.0) -
         jb * ((ab ? 1.0 : 0.0) + (cb ? 1.0 : 0.0))) /
        6.0;
    return cplx(0.0, val);
  }
  if (sig_out == -1) {
    if (plus != 1) return cplx(0.0, 0.0);
    const std::array<int, 3> jr{-j[0], -j[1], -j[2]};
    const std::array<int, 3> sr{-sig[0], -sig[1], -sig[2]};
    return std::conj(x3_coefficients(jr, -k, sr, +1));
  }
  return cplx(0.0, 0.0);
}

CubicTable x3_table(int J) {
  CubicTable t(J);
  for (int j1 = -J; j1 <= J; ++j1)
    for (int j2 = -J; j2 <= J; ++j2)
      for (int j3 = -J; j3 <= J; ++j3)
        t.c[t.idx(j1, j2, j3)] =
            x3_coefficients({j1, j2, j3}, t.out_k(j1, j2, j3), t.sig,
                            t.sig_out);
  return t;
}

CubicTable project_cubic(const CubicTable& t,
                         const std::function<bool(const IndexTuple&)>& keep) {
  double scale = 0.0;
  for (const cplx& v : t.c) scale = std::max(scale, std::abs(v));
  const double tol = 1e-12 * std::max(scale, 1.0);
  for (int p = 0; p < 3; ++p)
    for (int q = p + 1; q < 3; ++q) {
      if (t.sig[p] != t.sig[q]) continue;
      for (int j1 = -t.J; j1 <= t.J; ++j1)
        for (int j2 = -t.J; j2 <= t.J; ++j2)
          for (int j3 = -t.J; j3 <= t.J; ++j3) {
            std::array<int, 3> jj{j1, j2, j3};
            std::swap(jj[p], jj[q]);
            if (std::abs(t.at(j1, j2, j3) - t.at(jj[0], jj[1], jj[2])) > tol)
              throw std::invalid_argument(
                  "project_cubic: table not symmetric under equal-sign "
                  "index-pair permutation");
          }
    }
  CubicTable out = t;
  for (int j1 = -t.J; j1 <= t.J; ++j1)
    for (int j2 = -t.J; j2 <= t.J; ++j2)
      for (int j3 = -t.J; j3 <= t.J; ++j3)
        if (!keep(t.tuple(j1, j2, j3)))
          out.c[out.idx(j1, j2, j3)] = cplx(0.0, 0.0);
  return out;
}

std::function<bool(const IndexTuple&)> select_P(int n) {
  return [n](const IndexTuple& t) { return n_outside_lambda(t) == n; };
}

std::function<bool(const IndexTuple&)> select_S(int n, double alpha) {
  return [n, alpha](const IndexTuple& t) {
    const ResonanceTag tag = classify(t, alpha);
    return tag.n_outside == n && tag.resonant;
  };
}

Field assemble_cubic(const CubicTable& t, const Field& u) {
  int mult = 1;
  {
    const int plus = (t.sig[0] == 1) + (t.sig[1] == 1) + (t.sig[2] == 1);
    mult = (plus == 0 || plus == 3) ? 1 : 3;  // orderings of the sign multiset
  }
  Field out(3 * t.J);
  for (int j1 = -t.J; j1 <= t.J; ++j1)
    for (int j2 = -t.J; j2 <= t.J; ++j2)
      for (int j3 = -t.J; j3 <= t.J; ++j3) {
        const cplx coef = t.at(j1, j2, j3);
        if (coef == cplx(0.0, 0.0)) continue;
        const cplx f1 = (t.sig[0] == 1) ? u.at(j1) : std::conj(u.at(j1));
        const cplx f2 = (t.sig[1] == 1) ? u.at(j2) : std::conj(u.at(j2));
        const cplx f3 = (t.sig[2] == 1) ? u.at(j3) : std::conj(u.at(j3));
        const int k = t.out_k(j1, j2, j3);
        out.c[k + out.K] += static_cast<double>(mult) * coef * f1 * f2 * f3;
      }
  return out;
}

}  // namespace speclab
