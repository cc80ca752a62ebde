#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "speclab/dynamics.hpp"
#include "speclab/fourier.hpp"

using namespace speclab;

namespace {

double field_dist(const Field& a, const Field& b) {
  const int K = std::max(a.K, b.K);
  double m = 0.0;
  for (int k = -K; k <= K; ++k) m = std::max(m, std::abs(a.at(k) - b.at(k)));
  return m;
}

// Single-mode exact orbit of the truncated main flow: a e^{i k x - i w t},
// w = |k|^alpha - |a|^2 k.
Field plane_orbit_main(int K, int k, cplx a, double alpha, double t) {
  const double w = std::pow(std::abs(k), alpha) - std::norm(a) * k;
  return plane_wave(K, k, a * std::polar(1.0, -w * t));
}

}  // namespace

//====== right-hand sides ====================================================

TEST_CASE("rhs_main: plane-wave closed form and frozen frequency") {
  const double alpha = 0.5;
  Field u = plane_wave(8, 3, cplx(0.1, 0.0));
  Field r = rhs_main(u, alpha);

  // -i (|k|^alpha - a^2 k) u, frequency frozen at sqrt(3) - 0.03
  const double w_expected = 1.7020508075688772;
  CHECK(std::abs(r.at(3) - cplx(0.0, -1.0) * w_expected * u.at(3)) < 1e-15);
  for (int k = -8; k <= 8; ++k)
    if (k != 3) CHECK(std::abs(r.at(k)) < 1e-16);  // padded-FFT roundoff

  // negative mode: |k|^alpha even, k odd part flips the nonlinear shift
  Field um = plane_wave(8, -2, cplx(0.0, 0.2));
  Field rm = rhs_main(um, alpha);
  const double wm = std::pow(2.0, 0.5) - 0.04 * (-2.0);
  CHECK(std::abs(rm.at(-2) - cplx(0.0, -1.0) * wm * um.at(-2)) < 1e-15);

  CHECK(field_dist(rhs_main(Field(8), alpha), Field(8)) == 0.0);
}

TEST_CASE("rhs_renormalized: sign-flipped shift and exact difference") {
  const double alpha = 0.5;
  Field v = plane_wave(8, 3, cplx(0.1, 0.0));
  Field r = rhs_renormalized(v, alpha);
  const double w = std::sqrt(3.0) + 0.03;  // |k|^alpha + a^2 k
  CHECK(std::abs(r.at(3) - cplx(0.0, -1.0) * w * v.at(3)) < 1e-15);

  // rhs_renormalized - rhs_main = -mass v_x + i momentum v, exactly
  std::mt19937_64 rng(71);
  Field w8 = random_field(8, 2.0, 0.7, rng);
  Field diff = rhs_renormalized(w8, alpha) - rhs_main(w8, alpha);
  Field expect =
      cplx(0.0, 1.0) * momentum(w8) * w8 - mass(w8) * x_derivative(w8);
  CHECK(field_dist(diff, expect) < 1e-15);
}

//====== monitors ============================================================

TEST_CASE("monitor invariant: recomputation is bit-for-bit") {
  std::mt19937_64 rng(5);
  Field u0 = random_field(16, 2.0, 0.3, rng);
  Trajectory tr = integrate(RhsKind::Main, u0, 0.5, 1e-3, 0.05, 7.0, 2.0);
  REQUIRE(tr.states.size() == tr.monitors.size());
  for (std::size_t i = 0; i < tr.states.size(); ++i) {
    MonitorRecord m = monitor_state(tr.states[i], tr.s, tr.s0);
    CHECK(m.mass_v == tr.monitors[i].mass_v);
    CHECK(m.momentum_v == tr.monitors[i].momentum_v);
    CHECK(m.hs0 == tr.monitors[i].hs0);
    CHECK(m.hs == tr.monitors[i].hs);
    CHECK(m.ztop_l2 == tr.monitors[i].ztop_l2);
    CHECK(m.zperp_l2 == tr.monitors[i].zperp_l2);
    CHECK(m.zperp_hs0 == tr.monitors[i].zperp_hs0);
  }
}

//====== integrator accuracy and conservation ================================

TEST_CASE("integrate: plane-wave orbit is reproduced to 1e-7 relative") {
  const double alpha = 0.5, dt = 1e-3, T = 2.0;
  Field u0 = plane_wave(32, 3, cplx(0.1, 0.0));
  Trajectory tr = integrate(RhsKind::Main, u0, alpha, dt, T, 7.0, 2.0, 200);
  REQUIRE(tr.times.back() == doctest::Approx(T).epsilon(1e-12));
  Field exact = plane_orbit_main(32, 3, cplx(0.1, 0.0), alpha, T);
  double rel = field_dist(tr.states.back(), exact) / 0.1;
  CHECK(rel <= 1e-7);
}

TEST_CASE("integrate: mass and momentum drift below 1e-9 relative") {
  std::mt19937_64 rng(11);
  Field u0 = random_field(32, 2.0, 0.4, rng);
  for (RhsKind kind : {RhsKind::Main, RhsKind::Renormalized}) {
    Trajectory tr = integrate(kind, u0, 0.5, 1e-3, 2.0, 7.0, 2.0, 20);
    const double m0 = tr.monitors.front().mass_v;
    const double p0 = tr.monitors.front().momentum_v;
    double dm = 0.0, dp = 0.0;
    for (const MonitorRecord& m : tr.monitors) {
      dm = std::max(dm, std::abs(m.mass_v - m0));
      dp = std::max(dp, std::abs(m.momentum_v - p0));
    }
    CHECK(dm / m0 <= 1e-9);
    CHECK(dp / std::abs(p0) <= 1e-9);
  }
}

TEST_CASE("integrate: preconditions reject bad steps") {
  Field u0 = plane_wave(8, 1, cplx(0.5, 0.0));
  CHECK_THROWS_AS(integrate(RhsKind::Main, u0, 0.5, -1e-3, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(integrate(RhsKind::Main, u0, 0.5, 1e-3, -1.0),
                  std::invalid_argument);
  // dt K ||u0||_{s0}^2 = 0.3 * 8 * 0.25 = 0.6 > 0.5
  CHECK_THROWS_AS(integrate(RhsKind::Main, u0, 0.5, 0.3, 1.0),
                  std::invalid_argument);
}

//====== renormalization transform ===========================================

TEST_CASE("renormalize_transform: identity at t = 0 and norm preservation") {
  std::mt19937_64 rng(13);
  Field u0 = random_field(16, 2.0, 0.5, rng);
  Trajectory tr = integrate(RhsKind::Main, u0, 0.5, 1e-3, 0.2, 7.0, 2.0, 50);
  Trajectory vtr = renormalize_transform(tr);
  CHECK(field_dist(vtr.states.front(), tr.states.front()) == 0.0);
  for (std::size_t i = 0; i < tr.states.size(); ++i) {
    for (double s : {0.0, 2.0, 7.0}) {
      CHECK(sobolev_norm(vtr.states[i], s) ==
            doctest::Approx(sobolev_norm(tr.states[i], s)).epsilon(1e-13));
    }
  }
}

TEST_CASE("renormalize_transform: d/dt v matches rhs_renormalized at O(dt^2)") {
  const double alpha = 0.5;
  std::mt19937_64 rng(17);
  Field u0 = random_field(12, 3.0, 0.4, rng);

  auto fd_error = [&](double dt) {
    Trajectory tr =
        integrate(RhsKind::Main, u0, alpha, dt, 22.0 * dt, 7.0, 2.0);
    Trajectory v = renormalize_transform(tr);
    const std::size_t i = 10;
    Field fd = (1.0 / (2.0 * dt)) * (v.states[i + 1] - v.states[i - 1]);
    return field_dist(fd, rhs_renormalized(v.states[i], alpha));
  };

  const double e1 = fd_error(2e-3);
  const double e2 = fd_error(1e-3);
  CHECK(e1 < 1e-5);            // already O(dt^2)-small at dt = 2e-3
  CHECK(e2 <= 0.35 * e1);      // halving dt divides the error by ~4
  CHECK(e2 >= 0.15 * e1);
}

//====== symmetry covariance =================================================

TEST_CASE("integrate commutes with gauge and translation") {
  const double alpha = 0.5, dt = 2e-3, T = 0.5;
  std::mt19937_64 rng(19);
  Field u0 = random_field(16, 2.0, 0.4, rng);

  for (RhsKind kind : {RhsKind::Main, RhsKind::Renormalized}) {
    const double theta = 1.1;
    Trajectory a = integrate(kind, gauge(u0, theta), alpha, dt, T, 7.0, 2.0, 25);
    Trajectory b = integrate(kind, u0, alpha, dt, T, 7.0, 2.0, 25);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.states.size(); ++i)
      worst = std::max(worst,
                       field_dist(a.states[i], gauge(b.states[i], theta)));
    CHECK(worst <= 1e-10);
  }

  const double sigma = 0.7;
  Trajectory a = integrate(RhsKind::Main, translate(u0, sigma), alpha, dt, T,
                           7.0, 2.0, 25);
  Trajectory b = integrate(RhsKind::Main, u0, alpha, dt, T, 7.0, 2.0, 25);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.states.size(); ++i)
    worst =
        std::max(worst, field_dist(a.states[i], translate(b.states[i], sigma)));
  CHECK(worst <= 1e-10);
}

TEST_CASE("linear_step: +dt then -dt returns the state to 1e-12") {
  std::mt19937_64 rng(23);
  Field u = random_field(32, 2.0, 1.0, rng);
  Field back = linear_step(linear_step(u, 0.5, 0.37), 0.5, -0.37);
  CHECK(field_dist(back, u) <= 1e-12);
}

//====== effective flow ======================================================

TEST_CASE("propagate_effective: support precondition and free flow") {
  Field bad(8);
  bad.set(1, cplx(0.1, 0.0));
  CHECK_THROWS_AS(
      propagate_effective(bad, cplx(0.3, 0.0), cplx(0.3, 0.0), 0.5, 7.0, 68.0,
                          1e-2, 0.1),
      std::invalid_argument);

  Field z0(16);
  z0.set(2, cplx(0.1, 0.05));
  z0.set(-3, cplx(0.02, 0.0));

  // z1 = zm1 = 0: free flow, every Sobolev norm constant
  Trajectory fr = propagate_effective(z0, cplx(0.0, 0.0), cplx(0.0, 0.0), 0.5,
                                      7.0, 68.0, 1e-2, 0.5);
  for (const MonitorRecord& m : fr.monitors) {
    CHECK(m.hs == doctest::Approx(fr.monitors.front().hs).epsilon(1e-12));
    CHECK(m.mass_v ==
          doctest::Approx(fr.monitors.front().mass_v).epsilon(1e-12));
  }

  // J1 != 0, v = 0 (zm1 = 0): skew-adjoint constant multiplier
  Trajectory j1 = propagate_effective(z0, cplx(0.4, 0.0), cplx(0.0, 0.0), 0.5,
                                      7.0, 68.0, 1e-2, 0.5);
  for (const MonitorRecord& m : j1.monitors)
    CHECK(m.hs == doctest::Approx(j1.monitors.front().hs).epsilon(1e-12));
}

TEST_CASE("propagate_effective: mass conserved with full transport on") {
  Field z0(16);
  z0.set(2, cplx(0.08, 0.02));
  z0.set(-2, cplx(0.05, 0.0));
  z0.set(4, cplx(0.01, -0.01));
  Trajectory tr = propagate_effective(z0, cplx(0.3, 0.0), cplx(0.3, 0.0), 0.5,
                                      7.0, 68.0, 1e-2, 1.0);
  const double m0 = tr.monitors.front().mass_v;
  for (const MonitorRecord& m : tr.monitors)
    CHECK(std::abs(m.mass_v - m0) / m0 <= 1e-9);
}

TEST_CASE("propagate_effective: zero perturbation hooks match frozen path") {
  Field z0(12);
  z0.set(3, cplx(0.1, 0.0));
  z0.set(-2, cplx(0.0, 0.06));
  EffectiveHooks hooks;
  hooks.Vtilde = [](double) { return Field(2); };
  hooks.btilde = [](double) { return Field(2); };
  Trajectory a = propagate_effective(z0, cplx(0.3, 0.0), cplx(0.2, 0.1), 0.5,
                                     7.0, 68.0, 1e-2, 0.2);
  Trajectory b = propagate_effective(z0, cplx(0.3, 0.0), cplx(0.2, 0.1), 0.5,
                                     7.0, 68.0, 1e-2, 0.2, true, &hooks);
  REQUIRE(a.states.size() == b.states.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.states.size(); ++i)
    worst = std::max(worst, field_dist(a.states[i], b.states[i]));
  CHECK(worst <= 1e-10);
}

TEST_CASE("non-finite states abort with the last valid state kept") {
  Field z0(12);
  z0.set(2, cplx(0.1, 0.0));
  EffectiveHooks hooks;
  hooks.Vtilde = [](double t) {
    Field f(2);
    if (t > 0.05) f.set(0, cplx(std::nan(""), 0.0));
    return f;
  };
  Trajectory tr = propagate_effective(z0, cplx(0.3, 0.0), cplx(0.3, 0.0), 0.5,
                                      7.0, 68.0, 1e-2, 1.0, true, &hooks, 2.0,
                                      3);
  CHECK(tr.aborted);
  CHECK(!tr.abort_reason.empty());
  CHECK(tr.times.back() < 0.1);
  for (const Field& st : tr.states) CHECK(st.c.allFinite());
}

//====== window diagnostics ==================================================

TEST_CASE("monitor_long_time_controlled: trivial pass and threshold crossing") {
  const double eps = 0.5, theta = 0.05;

  Trajectory zero;
  zero.s = 3.0;
  zero.s0 = 2.0;
  zero.times = {0.0};
  zero.states = {Field(4)};
  zero.monitors = {monitor_state(Field(4), 3.0, 2.0)};
  LtcReport r0 = monitor_long_time_controlled(zero, eps, theta, 3.0, 2.0);
  CHECK(r0.a1_top);
  CHECK(r0.a1_perp);
  CHECK(r0.a2);
  CHECK(r0.first_violation_time == -1.0);

  // crafted crossing: |z_2| = 0.2 gives H^3 norm 1.6 > 0.5^{-0.05} ~ 1.035
  Trajectory tr;
  tr.s = 3.0;
  tr.s0 = 2.0;
  for (int i = 0; i <= 2; ++i) {
    Field st = plane_wave(4, 2, cplx(i == 2 ? 0.2 : 0.01, 0.0));
    tr.times.push_back(0.5 * i);
    tr.states.push_back(st);
    tr.monitors.push_back(monitor_state(st, tr.s, tr.s0));
  }
  LtcReport r = monitor_long_time_controlled(tr, eps, theta, 3.0, 2.0);
  CHECK(r.a1_top);   // no +-1 content
  CHECK(r.a1_perp);  // 0.01 <= 0.125
  CHECK(!r.a2);
  CHECK(r.first_violation_time == doctest::Approx(1.0));
  CHECK(r.a2_margin < 0.0);
}

TEST_CASE("bootstrap_check: free linear evolution of prepared data passes") {
  const double eps = 0.5, theta = 0.05, alpha = 0.5;
  Field u0(16);
  u0.set(1, cplx(0.2, 0.0));
  u0.set(-1, cplx(0.0, 0.2));
  u0.set(2, cplx(0.04, 0.0));
  u0.set(-2, cplx(0.04, 0.0));

  Trajectory tr;
  tr.s = 7.0;
  tr.s0 = 2.0;
  Field u = u0;
  for (int i = 0; i <= 20; ++i) {
    if (i > 0) u = linear_step(u, alpha, 0.05);
    tr.times.push_back(0.05 * i);
    tr.states.push_back(u);
    tr.monitors.push_back(monitor_state(u, tr.s, tr.s0));
  }

  BootstrapReport rep = bootstrap_check(tr, eps, theta, 2.0);
  REQUIRE(rep.bounds.size() == 4);
  CHECK(rep.all_pass);
  for (const BootstrapBound& b : rep.bounds) {
    CHECK(b.pass);
    CHECK(b.margin > 0.0);
  }
  CHECK(rep.bounds[0].name == "ztop_L2");
  CHECK(rep.bounds[0].worst_value ==
        doctest::Approx(std::sqrt(0.08)).epsilon(1e-12));

  // tamper: push the perp L2 bound past its threshold
  Field big = u0;
  big.set(3, cplx(0.2, 0.0));
  tr.states.push_back(big);
  tr.times.push_back(1.05);
  tr.monitors.push_back(monitor_state(big, tr.s, tr.s0));
  BootstrapReport rep2 = bootstrap_check(tr, eps, theta, 2.0);
  CHECK(!rep2.all_pass);
  CHECK(!rep2.bounds[3].pass);  // zperp_Hs0: <3>^2 * 0.2 = 1.8 > 0.25
  CHECK(rep2.bounds[3].worst_time == doctest::Approx(1.05));
}

TEST_CASE("interpolation inequality holds along a nonlinear trajectory") {
  std::mt19937_64 rng(29);
  Field u0 = random_field(16, 2.0, 0.4, rng);
  Trajectory tr =
      integrate(RhsKind::Renormalized, u0, 0.5, 1e-3, 0.2, 7.0, 2.0, 20);
  const double s = tr.s, s0 = tr.s0;
  for (const Field& st : tr.states) {
    Field perp = split_modes(st).normal;
    const double l2 = sobolev_norm(perp, 0.0);
    const double hs = sobolev_norm(perp, s);
    const double hs0 = sobolev_norm(perp, s0);
    CHECK(hs0 <= std::pow(l2, 1.0 - s0 / s) * std::pow(hs, s0 / s) + 1e-15);
  }
}

//====== output ==============================================================

TEST_CASE("trajectory CSV and snapshot round trip") {
  std::mt19937_64 rng(31);
  Field u0 = random_field(8, 2.0, 0.3, rng);
  Trajectory tr = integrate(RhsKind::Main, u0, 0.5, 1e-3, 0.01, 7.0, 2.0);

  const std::string csv = "traj_test.csv";
  std::vector<double> A(tr.times.size(), 0.25);
  dump_trajectory_csv(tr, csv, &A);
  std::ifstream is(csv);
  REQUIRE(is.good());
  std::string header;
  std::getline(is, header);
  CHECK(header ==
        "t,mass,momentum,Hs0,Hs,ztop_L2,zperp_L2,zperp_Hs0,A_functional");
  int rows = 0;
  for (std::string line; std::getline(is, line);)
    if (!line.empty()) ++rows;
  CHECK(rows == static_cast<int>(tr.times.size()));
  is.close();
  std::remove(csv.c_str());

  std::vector<std::string> names = dump_trajectory_snapshots(tr, "snap_", 5);
  REQUIRE(!names.empty());
  std::ifstream js(names[0]);
  std::stringstream buf;
  buf << js.rdbuf();
  Field back = field_from_json(buf.str(), tr.states[0].K);
  CHECK(field_dist(back, tr.states[0]) <= 1e-15);
  for (const std::string& n : names) std::remove(n.c_str());
}
