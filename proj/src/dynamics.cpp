//====== dynamics.cpp — integrating-factor RK4 and window diagnostics ========

#include "speclab/dynamics.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "speclab/paradiff.hpp"
#include "speclab/symbols.hpp"

namespace speclab {

namespace {

// Nonlinear part of the chosen right-hand side (everything but -i|D|^a).
Field nonlinear_part(RhsKind kind, const Field& u) {
  Field n = cubic_term(u);
  if (kind == RhsKind::Renormalized) {
    n = n - mass(u) * x_derivative(u) + cplx(0.0, 1.0) * momentum(u) * u;
  }
  return n;
}

Field apply_diag(const Vec& d, const Field& u) {
  Field r = u;
  r.c = d.cwiseProduct(u.c);
  return r;
}

// Diagonal of e^{-i dt |k|^a}.
Vec half_dispersion_diag(int K, double alpha, double dt) {
  Vec d(2 * K + 1);
  for (int k = -K; k <= K; ++k)
    d(k + K) = std::polar(1.0, -dt * std::pow(std::abs(k), alpha));
  return d;
}

bool finite_state(const Field& u) { return u.c.allFinite(); }

void record(Trajectory& traj, double t, const Field& u) {
  traj.times.push_back(t);
  traj.states.push_back(u);
  traj.monitors.push_back(monitor_state(u, traj.s, traj.s0));
}

// One Lawson step u(t) -> u(t+h): A = e^{-i(h/2)|D|^a} as a diagonal, the
// classical RK4 tableau applied to the twisted field.  N(t, .) is the full
// nonlinear (or time-dependent linear perturbation) part.
template <class NFun>
Field lawson_step(const Field& u, const Vec& A, double h, double t,
                  const NFun& N) {
  Field k1 = N(t, u);
  Field k2 = N(t + 0.5 * h, apply_diag(A, u + (0.5 * h) * k1));
  Field k3 = N(t + 0.5 * h, apply_diag(A, u) + (0.5 * h) * k2);
  Field k4 = N(t + h, apply_diag(A, apply_diag(A, u) + h * k3));
  Field out = apply_diag(A, apply_diag(A, u + (h / 6.0) * k1) +
                                (h / 3.0) * (k2 + k3)) +
              (h / 6.0) * k4;
  return out;
}

// Shared stepping loop; N must be callable as N(t, u).
template <class NFun>
Trajectory run_lawson(const Field& u0, double alpha, double dt, double T,
                      double s, double s0, int record_stride, const NFun& N) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate: dt must be > 0");
  if (!(T >= 0.0)) throw std::invalid_argument("integrate: T must be >= 0");
  if (record_stride < 1)
    throw std::invalid_argument("integrate: record_stride must be >= 1");

  Trajectory traj;
  traj.alpha = alpha;
  traj.s = s;
  traj.s0 = s0;

  const long n_steps = std::lround(std::ceil(T / dt - 1e-12));
  Vec A = half_dispersion_diag(u0.K, alpha, 0.5 * dt);

  Field u = u0;
  double t = 0.0;
  record(traj, t, u);
  for (long i = 0; i < n_steps; ++i) {
    double h = dt;
    const Vec* prop = &A;
    Vec last;  // shorter final step gets its own propagator
    if (i == n_steps - 1) {
      h = T - dt * static_cast<double>(n_steps - 1);
      if (std::abs(h - dt) > 1e-12 * dt) {
        last = half_dispersion_diag(u0.K, alpha, 0.5 * h);
        prop = &last;
      } else {
        h = dt;
      }
    }
    Field next = lawson_step(u, *prop, h, t, N);
    const double t_prev = t;
    t = (i == n_steps - 1) ? T : dt * static_cast<double>(i + 1);
    if (!finite_state(next)) {
      traj.aborted = true;
      std::ostringstream os;
      os << "non-finite state at t = " << t;
      traj.abort_reason = os.str();
      if (traj.times.back() != t_prev) record(traj, t_prev, u);
      break;
    }
    u = next;
    if ((i + 1) % record_stride == 0 || i == n_steps - 1) record(traj, t, u);
  }
  return traj;
}

}  // namespace

//====== right-hand sides ====================================================

Field rhs_main(const Field& u, double alpha) {
  Field r = cubic_term(u);
  for (int k = -u.K; k <= u.K; ++k)
    r.c(k + u.K) -= cplx(0.0, 1.0) * std::pow(std::abs(k), alpha) * u.at(k);
  return r;
}

Field rhs_renormalized(const Field& v, double alpha) {
  Field r = rhs_main(v, alpha);
  r = r - mass(v) * x_derivative(v) + cplx(0.0, 1.0) * momentum(v) * v;
  return r;
}

Field linear_step(const Field& u, double alpha, double dt) {
  return apply_diag(half_dispersion_diag(u.K, alpha, dt), u);
}

//====== trajectories ========================================================

MonitorRecord monitor_state(const Field& u, double s, double s0) {
  MonitorRecord m;
  m.mass_v = mass(u);
  m.momentum_v = momentum(u);
  m.hs0 = sobolev_norm(u, s0);
  m.hs = sobolev_norm(u, s);
  ModeSplit sp = split_modes(u);
  m.ztop_l2 = sobolev_norm(sp.tangential, 0.0);
  m.zperp_l2 = sobolev_norm(sp.normal, 0.0);
  m.zperp_hs0 = sobolev_norm(sp.normal, s0);
  return m;
}

Trajectory integrate(RhsKind kind, const Field& u0, double alpha, double dt,
                     double T, double s, double s0, int record_stride) {
  const double n0 = sobolev_norm(u0, s0);
  if (!(dt * u0.K * n0 * n0 <= 0.5))
    throw std::invalid_argument(
        "integrate: step-size sanity dt K ||u0||_{s0}^2 <= 0.5 violated");
  auto N = [kind](double, const Field& w) { return nonlinear_part(kind, w); };
  return run_lawson(u0, alpha, dt, T, s, s0, record_stride, N);
}

Trajectory renormalize_transform(const Trajectory& u_traj) {
  Trajectory out = u_traj;
  for (std::size_t i = 0; i < u_traj.states.size(); ++i) {
    const Field& u = u_traj.states[i];
    const double t = u_traj.times[i];
    Field v = gauge(translate(u, -mass(u) * t), momentum(u) * t);
    out.states[i] = v;
    out.monitors[i] = monitor_state(v, out.s, out.s0);
  }
  return out;
}

//====== effective flow ======================================================

namespace {

// (c0 + f(x)) xi as a sampled symbol of order 1.
SymbolGrid first_order_symbol(const Field& f, double c0, int M, int Xi) {
  SymbolGrid g(M, Xi, 1.0);
  Vec vals = grid_values(f, M);
  for (int m = 0; m < M; ++m)
    for (int h = 0; h < g.nxi(); ++h)
      g.values(m, h) = (c0 + vals(m)) * g.xi_at(h);
  return g;
}

}  // namespace

Trajectory propagate_effective(const Field& zeta0, cplx z1, cplx zm1,
                               double alpha, double s, double R, double dt,
                               double T, bool include_perturbations,
                               const EffectiveHooks* hooks, double s0,
                               int record_stride) {
  if (!(R > 0.0))
    throw std::invalid_argument("propagate_effective: R must be > 0");
  if (std::abs(zeta0.at(1)) != 0.0 || std::abs(zeta0.at(-1)) != 0.0)
    throw std::invalid_argument(
        "propagate_effective: zeta0 must vanish on modes +-1");
  if (!(dt > 0.0) || !(T >= 0.0))
    throw std::invalid_argument("propagate_effective: need dt > 0, T >= 0");
  if (record_stride < 1)
    throw std::invalid_argument("propagate_effective: record_stride >= 1");

  const int K = zeta0.K;
  const int n = 2 * K + 1;
  const double J1 = constants_J1_I1(z1, zm1).first;

  Field fv(2);  // v(x) = 2 Re(z1 conj(zm1) e^{i2x})
  fv.set(2, z1 * std::conj(zm1));
  fv.set(-2, std::conj(z1) * zm1);

  Mat B = Mat::Zero(n, n);
  {
    SymbolGrid g = first_order_symbol(resize(fv, 2), J1, default_M(K),
                                      default_Xi(K));
    B = cplx(0.0, 1.0) * quantize_bw(g, K).matrix;
    for (int k = -K; k <= K; ++k)
      B(k + K, k + K) -= cplx(0.0, 1.0) * std::pow(std::abs(k), alpha);
  }

  const bool with_hooks =
      include_perturbations && hooks != nullptr &&
      (static_cast<bool>(hooks->Vtilde) || static_cast<bool>(hooks->btilde));

  Trajectory traj;
  traj.alpha = alpha;
  traj.s = s;
  traj.s0 = s0;

  const long n_steps = std::lround(std::ceil(T / dt - 1e-12));
  Field u = zeta0;
  double t = 0.0;
  record(traj, t, u);

  if (!with_hooks) {
    Mat E = (dt * B).exp();  // one matrix exponential, reused across steps
    for (long i = 0; i < n_steps; ++i) {
      double h = dt;
      const Mat* prop = &E;
      Mat last;
      if (i == n_steps - 1) {
        h = T - dt * static_cast<double>(n_steps - 1);
        if (std::abs(h - dt) > 1e-12 * dt) {
          last = (h * B).exp();
          prop = &last;
        }
      }
      Field next = u;
      next.c = (*prop) * u.c;
      const double t_prev = t;
      t = (i == n_steps - 1) ? T : dt * static_cast<double>(i + 1);
      if (!finite_state(next)) {
        traj.aborted = true;
        traj.abort_reason = "non-finite state in effective flow";
        if (traj.times.back() != t_prev) record(traj, t_prev, u);
        break;
      }
      u = next;
      if ((i + 1) % record_stride == 0 || i == n_steps - 1) record(traj, t, u);
    }
    return traj;
  }

  // Perturbed path: frozen exponential as the integrating factor, RK4 on the
  // time-dependent remainder i Opbw(Vtilde(t) xi) + i Opbw(btilde(t)).
  Mat Ehalf = (0.5 * dt * B).exp();
  const int M = default_M(K);
  const int Xi = default_Xi(K);
  auto P_apply = [&](double tau, const Field& w) {
    Field out(w.K);
    if (hooks->Vtilde) {
      SymbolGrid g = first_order_symbol(hooks->Vtilde(tau), 0.0, M, Xi);
      out = out + apply_matrix(cplx(0.0, 1.0) * quantize_bw(g, K).matrix, w);
    }
    if (hooks->btilde) {
      SymbolGrid g = grid_from_field(hooks->btilde(tau), 0.0, M, Xi);
      out = out + apply_matrix(cplx(0.0, 1.0) * quantize_bw(g, K).matrix, w);
    }
    return out;
  };
  auto matstep = [](const Mat& Emat, const Field& w) {
    Field r = w;
    r.c = Emat * w.c;
    return r;
  };
  for (long i = 0; i < n_steps; ++i) {
    double h = dt;
    Mat A = Ehalf;
    if (i == n_steps - 1) {
      h = T - dt * static_cast<double>(n_steps - 1);
      if (std::abs(h - dt) > 1e-12 * dt)
        A = (0.5 * h * B).exp();
      else
        h = dt;
    }
    Field k1 = P_apply(t, u);
    Field k2 = P_apply(t + 0.5 * h, matstep(A, u + (0.5 * h) * k1));
    Field k3 = P_apply(t + 0.5 * h, matstep(A, u) + (0.5 * h) * k2);
    Field k4 = P_apply(t + h, matstep(A, matstep(A, u) + h * k3));
    Field next = matstep(A, matstep(A, u + (h / 6.0) * k1) +
                                (h / 3.0) * (k2 + k3)) +
                 (h / 6.0) * k4;
    const double t_prev = t;
    t = (i == n_steps - 1) ? T : dt * static_cast<double>(i + 1);
    if (!finite_state(next)) {
      traj.aborted = true;
      traj.abort_reason = "non-finite state in effective flow";
      if (traj.times.back() != t_prev) record(traj, t_prev, u);
      break;
    }
    u = next;
    if ((i + 1) % record_stride == 0 || i == n_steps - 1) record(traj, t, u);
  }
  return traj;
}

//====== window diagnostics ==================================================

LtcReport monitor_long_time_controlled(const Trajectory& traj, double eps,
                                       double theta, double s, double s0) {
  if (traj.monitors.empty())
    throw std::invalid_argument("monitor_long_time_controlled: empty");
  (void)s0;
  LtcReport r;
  const MonitorRecord& m0 = traj.monitors.front();
  r.a1_top_margin = eps - m0.ztop_l2;
  r.a1_perp_margin = eps * eps * eps - m0.zperp_l2;
  r.a1_top = r.a1_top_margin >= 0.0;
  r.a1_perp = r.a1_perp_margin >= 0.0;

  // The trajectory's own s is authoritative for the stored Hs monitor; a
  // mismatched request recomputes from states.
  const bool recompute = std::abs(s - traj.s) > 0.0;
  const double cap = std::pow(eps, -theta);
  r.a2 = true;
  r.a2_margin = cap;
  r.first_violation_time = -1.0;
  for (std::size_t i = 0; i < traj.monitors.size(); ++i) {
    const double hs =
        recompute ? sobolev_norm(traj.states[i], s) : traj.monitors[i].hs;
    r.a2_margin = std::min(r.a2_margin, cap - hs);
    if (hs > cap && r.first_violation_time < 0.0) {
      r.a2 = false;
      r.first_violation_time = traj.times[i];
    }
  }
  return r;
}

BootstrapReport bootstrap_check(const Trajectory& traj, double eps,
                                double theta, double s0) {
  if (traj.monitors.empty())
    throw std::invalid_argument("bootstrap_check: empty trajectory");
  const bool recompute = std::abs(s0 - traj.s0) > 0.0;

  struct Probe {
    std::string name;
    double bound;
    std::function<double(const Trajectory&, std::size_t)> value;
  };
  const std::vector<Probe> probes = {
      {"ztop_L2", 2.0 * eps,
       [](const Trajectory& tr, std::size_t i) {
         return tr.monitors[i].ztop_l2;
       }},
      {"zperp_L2", std::pow(eps, 3.0 - 1.5 * theta),
       [](const Trajectory& tr, std::size_t i) {
         return tr.monitors[i].zperp_l2;
       }},
      {"z_Hs0", 3.0 * eps,
       [recompute, s0](const Trajectory& tr, std::size_t i) {
         return recompute ? sobolev_norm(tr.states[i], s0)
                          : tr.monitors[i].hs0;
       }},
      {"zperp_Hs0", eps * eps,
       [recompute, s0](const Trajectory& tr, std::size_t i) {
         if (!recompute) return tr.monitors[i].zperp_hs0;
         return sobolev_norm(split_modes(tr.states[i]).normal, s0);
       }},
  };

  BootstrapReport rep;
  rep.all_pass = true;
  for (const Probe& p : probes) {
    BootstrapBound b;
    b.name = p.name;
    b.bound = p.bound;
    b.worst_value = -1.0;
    for (std::size_t i = 0; i < traj.monitors.size(); ++i) {
      const double v = p.value(traj, i);
      if (v > b.worst_value) {
        b.worst_value = v;
        b.worst_time = traj.times[i];
      }
    }
    b.margin = b.bound - b.worst_value;
    b.pass = b.margin >= 0.0;
    rep.all_pass = rep.all_pass && b.pass;
    rep.bounds.push_back(b);
  }
  return rep;
}

//====== output ==============================================================

void dump_trajectory_csv(const Trajectory& traj, const std::string& path,
                         const std::vector<double>* A_values) {
  if (A_values && A_values->size() != traj.times.size())
    throw std::invalid_argument("dump_trajectory_csv: A_values size mismatch");
  std::ofstream os(path);
  if (!os) throw std::runtime_error("dump_trajectory_csv: cannot open " + path);
  os << std::setprecision(17);
  os << "t,mass,momentum,Hs0,Hs,ztop_L2,zperp_L2,zperp_Hs0";
  if (A_values) os << ",A_functional";
  os << "\n";
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const MonitorRecord& m = traj.monitors[i];
    os << traj.times[i] << ',' << m.mass_v << ',' << m.momentum_v << ','
       << m.hs0 << ',' << m.hs << ',' << m.ztop_l2 << ',' << m.zperp_l2 << ','
       << m.zperp_hs0;
    if (A_values) os << ',' << (*A_values)[i];
    os << "\n";
  }
}

std::vector<std::string> dump_trajectory_snapshots(const Trajectory& traj,
                                                   const std::string& prefix,
                                                   int stride) {
  if (stride < 1)
    throw std::invalid_argument("dump_trajectory_snapshots: stride >= 1");
  std::vector<std::string> names;
  for (std::size_t i = 0; i < traj.states.size();
       i += static_cast<std::size_t>(stride)) {
    std::string name = prefix + std::to_string(i) + ".json";
    std::ofstream os(name);
    if (!os)
      throw std::runtime_error("dump_trajectory_snapshots: cannot open " +
                               name);
    os << field_to_json(traj.states[i]);
    names.push_back(name);
  }
  return names;
}

}  // namespace speclab
