//====== dynamics.hpp — time integration and long-time diagnostics ===========
//
// Integrating-factor RK4 (Lawson) stepping for the truncated flows: the
// linear half-dispersion e^{-it|D|^a} is an exact diagonal multiplier, the
// cubic nonlinearity is evaluated dealiased on a padded grid.  Trajectories
// carry per-time conservation and mode-split monitors; the long-time
// controlled and bootstrap window checks evaluate those monitors against
// the (eps, theta) thresholds.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "speclab/fourier.hpp"

namespace speclab {

//====== right-hand sides ====================================================

enum class RhsKind { Main, Renormalized };

// -i|D|^a u + trunc(|u|^2 u_x), cubic evaluated alias-free.
Field rhs_main(const Field& u, double alpha);

// -i|D|^a v + trunc(|v|^2 v_x) - mass(v) v_x + i momentum(v) v.
Field rhs_renormalized(const Field& v, double alpha);

// Exact linear flow u_k -> e^{-i dt |k|^a} u_k (the integrating factor).
Field linear_step(const Field& u, double alpha, double dt);

//====== trajectories ========================================================

struct MonitorRecord {
  double mass_v = 0.0;
  double momentum_v = 0.0;
  double hs0 = 0.0;
  double hs = 0.0;
  double ztop_l2 = 0.0;   // modes +-1, L^2
  double zperp_l2 = 0.0;  // complement, L^2
  double zperp_hs0 = 0.0;
};

MonitorRecord monitor_state(const Field& u, double s, double s0);

struct Trajectory {
  std::vector<double> times;
  std::vector<Field> states;
  std::vector<MonitorRecord> monitors;
  double alpha = 0.5;
  double s = 7.0;
  double s0 = 2.0;
  bool aborted = false;  // non-finite state detected; last valid state kept
  std::string abort_reason;
};

// Lawson RK4.  Preconditions: dt > 0, T >= 0, and the step-size sanity
// dt * K * ||u0||_{s0}^2 <= 0.5 (throws std::invalid_argument otherwise).
// States/monitors are recorded every record_stride-th step plus the final
// one.  A non-finite state aborts the run; the trajectory keeps every
// recorded state up to the last valid one and sets `aborted`.
Trajectory integrate(RhsKind kind, const Field& u0, double alpha, double dt,
                     double T, double s = 7.0, double s0 = 2.0,
                     int record_stride = 1);

// v(t,x) = e^{i t momentum(u(t))} u(t, x - mass(u(t)) t), applied per state;
// unimodular per-mode phases, so every Sobolev norm is preserved.
Trajectory renormalize_transform(const Trajectory& u_traj);

//====== effective flow on the normal modes ==================================

// Optional time-dependent perturbation streams: first-order coefficients
// Vtilde(t) enter the generator as i Opbw(Vtilde(t,x) xi), zero-order ones
// as i Opbw(btilde(t,x)).
struct EffectiveHooks {
  std::function<Field(double)> Vtilde;
  std::function<Field(double)> btilde;
};

// d/dt zeta = -i|D|^a zeta + i Opbw((J1 + v(x)) xi) zeta, with
// v(x) = 2 Re(z1 conj(zm1) e^{i2x}) and J1 = (|z1|^2 + |zm1|^2)/2.  The
// frozen generator is exponentiated once (scaling-and-squaring) and the
// resulting one-step matrix is reused across all steps; with hooks enabled
// the perturbation is added by integrating-factor RK4 around that matrix.
// Precondition: zeta0 vanishes on the tangential modes +-1 (throws).
// R is recorded for escape-function diagnostics; the generator itself does
// not depend on it.
Trajectory propagate_effective(const Field& zeta0, cplx z1, cplx zm1,
                               double alpha, double s, double R, double dt,
                               double T, bool include_perturbations = false,
                               const EffectiveHooks* hooks = nullptr,
                               double s0 = 2.0, int record_stride = 1);

//====== window diagnostics ==================================================

struct LtcReport {
  bool a1_top = false;       // ||ztop(0)||_{L2} <= eps
  bool a1_perp = false;      // ||zperp(0)||_{L2} <= eps^3
  bool a2 = false;           // sup_t ||z(t)||_s <= eps^{-theta}
  double a1_top_margin = 0.0;   // bound - value at t = 0
  double a1_perp_margin = 0.0;
  double a2_margin = 0.0;       // min_t (bound - value)
  double first_violation_time = -1.0;  // -1 when no violation
};

LtcReport monitor_long_time_controlled(const Trajectory& traj, double eps,
                                       double theta, double s, double s0);

struct BootstrapBound {
  std::string name;
  double bound = 0.0;
  double worst_value = 0.0;
  double worst_time = 0.0;
  double margin = 0.0;  // bound - worst_value
  bool pass = false;
};

struct BootstrapReport {
  std::vector<BootstrapBound> bounds;  // ztop_L2, zperp_L2, z_Hs0, zperp_Hs0
  bool all_pass = false;
};

// ||ztop|| <= 2 eps, ||zperp||_{L2} <= eps^{3-1.5 theta},
// ||z||_{s0} <= 3 eps, ||zperp||_{s0} <= eps^2, over the whole horizon.
BootstrapReport bootstrap_check(const Trajectory& traj, double eps,
                                double theta, double s0);

//====== output ==============================================================

// Header: t,mass,momentum,Hs0,Hs,ztop_L2,zperp_L2,zperp_Hs0[,A_functional].
// A_values, when given, must have one entry per recorded time.
void dump_trajectory_csv(const Trajectory& traj, const std::string& path,
                         const std::vector<double>* A_values = nullptr);

// Writes states at the given stride as field JSON to
// prefix + "<recorded index>.json"; returns the file names written.
std::vector<std::string> dump_trajectory_snapshots(const Trajectory& traj,
                                                   const std::string& prefix,
                                                   int stride);

}  // namespace speclab
