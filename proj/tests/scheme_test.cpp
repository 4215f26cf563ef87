#include <dendrite/scheme.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

using namespace dendrite;

namespace {

constexpr double pi = std::numbers::pi;

StepperState make_state(const Grid& g, const ModelParams& p, int order, double dt, int substeps = 1) {
  SchemeOptions o;
  o.order = order;
  o.dt = dt;
  o.startup_substeps = substeps;
  return StepperState(g, p, o);
}

ModelParams stability_params() {
  ModelParams p;
  p.tau = 1e2;
  p.eps = 0.1;
  p.lambda = 1.0;
  p.diff_D = 0.225;
  p.latent_K = 1.0;
  p.sigma = 0.05;
  p.s1 = p.s2 = 4.0;
  return p;
}

std::pair<RealField, RealField> disk(const Grid& g, double radius = 1.5, double width = 0.1) {
  auto phi = sample(g, [&](double x, double y, double) {
    return std::tanh((radius - std::hypot(x - pi, y - pi)) / width);
  });
  return {phi, RealField(g, -0.55)};
}

RealField smooth_random(const Grid& g, unsigned seed, double amp) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> a(-amp, amp), ph(0, 2 * pi);
  RealField f(g);
  for (int kx = 0; kx <= 3; ++kx)
    for (int ky = -3; ky <= 3; ++ky) {
      const double c = a(rng), s = ph(rng);
      axpy(1.0, sample(g, [&](double x, double y, double) { return c * std::cos(kx * x + ky * y + s); }), f);
    }
  return f;
}

}  // namespace

TEST(Tableau, PublishedWeights) {
  const auto t1 = BdfTableau::of(1), t2 = BdfTableau::of(2), t3 = BdfTableau::of(3);
  EXPECT_EQ(t1.alpha, 1.0);
  EXPECT_EQ(t2.alpha, 1.5);
  EXPECT_DOUBLE_EQ(t3.alpha, 11.0 / 6.0);
  EXPECT_EQ(t2.a[1], -0.5);
  EXPECT_EQ(t3.a[2], 1.0 / 3.0);
  EXPECT_EQ(t3.b[1], -3.0);
  EXPECT_THROW(BdfTableau::of(4), std::invalid_argument);
}

TEST(Tableau, Consistency) {
  for (int k = 1; k <= 3; ++k) {
    const auto t = BdfTableau::of(k);
    EXPECT_NEAR(t.a[0] + t.a[1] + t.a[2], t.alpha, 1e-15) << k;
    EXPECT_NEAR(t.b[0] + t.b[1] + t.b[2], 1.0, 1e-15) << k;
  }
}

TEST(Extrapolation, Examples) {
  const auto g = Grid::periodic(2, 8);
  std::deque<RealField> h1{RealField(g, 0.7)};
  EXPECT_EQ(extrapolate_A(h1, BdfTableau::of(1))[0], 0.7);
  EXPECT_EQ(extrapolate_B(h1, BdfTableau::of(1))[0], 0.7);

  std::deque<RealField> h2{RealField(g, 2.0), RealField(g, 2.0)};
  EXPECT_DOUBLE_EQ(extrapolate_A(h2, BdfTableau::of(2))[5], 3.0);
  EXPECT_DOUBLE_EQ(extrapolate_B(h2, BdfTableau::of(2))[5], 2.0);

  std::deque<RealField> h3{RealField(g, 3.0), RealField(g, 2.0), RealField(g, 1.0)};
  EXPECT_DOUBLE_EQ(extrapolate_A(h3, BdfTableau::of(3))[0], 19.0 / 3.0);
  EXPECT_DOUBLE_EQ(extrapolate_B(h3, BdfTableau::of(3))[0], 4.0);

  EXPECT_THROW(extrapolate_A(h2, BdfTableau::of(3)), std::invalid_argument);
}

TEST(Divisors, Arithmetic) {
  ModelParams p;
  p.s1 = p.s2 = 4.0;
  EXPECT_DOUBLE_EQ(phase_divisor(p, BdfTableau::of(1), 0.1, 4.0), 30.0);
  p.diff_D = 0.225;
  EXPECT_NEAR(heat_divisor(p, BdfTableau::of(1), 0.1, 9.0), 12.025, 1e-12);
}

TEST(SolvePhase, EquilibriumFixedPoint) {
  const auto g = Grid::periodic(2, 16);
  ModelParams p;
  p.s1 = 2.0;
  auto s = make_state(g, p, 1, 0.1);
  startup(s, RealField(g, 1.0), RealField(g, 0.0));
  const auto phi_bar = solve_phase(s);
  EXPECT_LT(max_abs(difference(phi_bar, RealField(g, 1.0))), 1e-14);
}

TEST(SolvePhase, SingleToneAgainstModalOracle) {
  // sigma = 0, S1 = 1, S2 = 0: the Laplacian is fully implicit and f is explicit, so
  // for phi = a sin x the two resolved modes (k = 1 and k = 3) follow in closed form.
  const auto g = Grid::periodic(2, 32);
  ModelParams p;
  p.tau = 2.0;
  p.eps = 0.8;
  p.s1 = 1.0;
  const double dt = 0.05, a = 0.3;
  auto s = make_state(g, p, 1, dt);
  const auto phi = sample(g, [&](double x, double, double) { return a * std::sin(x); });
  startup(s, phi, RealField(g, 0.0));
  const auto phi_bar = solve_phase(s);

  const double inv_e2 = 1.0 / (p.eps * p.eps), r = p.tau / dt;
  // sin^3 x = (3 sin x - sin 3x) / 4
  const double c1 = (r * a - (0.75 * a * a * a - a) * inv_e2) / (r + 1.0);
  const double c3 = (0.25 * a * a * a * inv_e2) / (r + 9.0);
  const auto expect = sample(g, [&](double x, double, double) { return c1 * std::sin(x) + c3 * std::sin(3 * x); });
  EXPECT_LT(max_abs(difference(phi_bar, expect)), 1e-13);
}

TEST(SolveHeat, ConstantIsConserved) {
  const auto g = Grid::periodic(2, 16);
  ModelParams p;
  auto s = make_state(g, p, 1, 0.1);
  startup(s, RealField(g, 1.0), RealField(g, 0.4));
  const auto phi_bar = solve_phase(s);
  const auto u_bar = solve_heat(s, phi_bar);
  EXPECT_LT(max_abs(difference(u_bar, RealField(g, 0.4))), 1e-14);
}

TEST(SolveHeat, ToneDecaysByImplicitFactor) {
  // phi = 1 makes F(B phi) vanish, decoupling the heat equation.
  const auto g = Grid::periodic(2, 16);
  ModelParams p;
  p.diff_D = 0.3;
  const double dt = 0.2;
  auto s = make_state(g, p, 1, dt);
  const auto u = sample(g, [](double x, double, double) { return std::sin(x); });
  startup(s, RealField(g, 1.0), u);
  const auto phi_bar = solve_phase(s);
  const auto u_bar = solve_heat(s, phi_bar);
  EXPECT_LT(max_abs(difference(u_bar, scaled(u, 1.0 / (1.0 + p.diff_D * dt)))), 1e-14);
}

TEST(Auxiliary, QbarArithmetic) {
  EXPECT_DOUBLE_EQ(qbar_from(2.0, 1.0, 0.0, 0.1), 2.0);
  EXPECT_NEAR(qbar_from(2.0, 1.0, 5.0, 0.1), 4.0 / 3.0, 1e-15);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int i = 0; i < 1000; ++i) {
    const double q = 1.0 + u(rng), E = 1.0 + u(rng), H = u(rng), dt = u(rng) / 100.0;
    const double qb = qbar_from(q, E, H, dt);
    EXPECT_GT(qb, 0.0);
    EXPECT_LE(qb, q);
  }
}

TEST(Auxiliary, UpdateQbarFromFields) {
  const auto g = Grid::periodic(2, 16);
  ModelParams p;
  const auto phi = sample(g, [](double x, double y, double) { return 0.5 * std::sin(x) * std::cos(y); });
  const auto u = sample(g, [](double x, double, double) { return 0.1 * std::cos(x); });
  const auto r = update_qbar(3.0, phi, u, p, 0.01);
  EXPECT_DOUBLE_EQ(r.E_bar, energy_total(phi, u, p));
  EXPECT_DOUBLE_EQ(r.H_bar, dissipation_H(phi, u, p));
  EXPECT_DOUBLE_EQ(r.qbar, 3.0 / (1.0 + 0.01 * r.H_bar / r.E_bar));
  EXPECT_THROW(update_qbar(0.0, phi, u, p, 0.01), ConsistencyError);
}

TEST(Auxiliary, XiEta) {
  for (int k = 1; k <= 3; ++k) {
    EXPECT_EQ(xi_eta(4.0, 4.0, k).eta, 1.0);
    EXPECT_EQ(xi_eta(0.0, 4.0, k).eta, 0.0);
  }
  const auto r = xi_eta(0.9, 1.0, 2);
  EXPECT_DOUBLE_EQ(r.xi, 0.9);
  EXPECT_NEAR(r.eta, 0.999, 1e-15);
}

TEST(Auxiliary, ApplyEta) {
  const auto g = Grid::periodic(2, 8);
  const RealField two(g, 2.0), three(g, 3.0);
  auto [a, b] = apply_eta(two, three, 1.0);
  EXPECT_EQ(a[3], 2.0);
  EXPECT_EQ(b[3], 3.0);
  auto [c, d] = apply_eta(two, three, 0.0);
  EXPECT_EQ(max_abs(c), 0.0);
  EXPECT_EQ(max_abs(d), 0.0);
  auto [e, f] = apply_eta(two, three, 0.5);
  EXPECT_EQ(e[0], 1.0);
  EXPECT_EQ(f[0], 1.5);
}

TEST(Relaxation, ThreeCases) {
  const auto c1 = relax_q(5.0, 4.0, 1.0, 3.0, 0.1);
  EXPECT_EQ(c1.case_id, 1);
  EXPECT_EQ(c1.zeta, 0.0);
  EXPECT_EQ(c1.q_next, 3.0);

  // dt * (qbar/E_bar) * H_bar = 0.1 * 1 * 20 = 2
  const auto c2 = relax_q(2.0, 2.0, 20.0, 3.0, 0.1);
  EXPECT_EQ(c2.case_id, 2);
  EXPECT_EQ(c2.zeta, 0.0);
  EXPECT_EQ(c2.q_next, 3.0);

  const auto c3 = relax_q(2.0, 2.0, 1.0, 3.0, 0.1);
  EXPECT_EQ(c3.case_id, 3);
  EXPECT_NEAR(c3.zeta, 0.9, 1e-15);
  EXPECT_NEAR(c3.q_next, 2.1, 1e-15);
}

TEST(Relaxation, GuardTreatsRoundingAsCaseTwo) {
  const double qbar = 1.0e6;
  const auto r = relax_q(qbar, qbar, 0.0, qbar * (1.0 + 1e-15), 0.1);
  EXPECT_EQ(r.case_id, 2);
  EXPECT_EQ(r.zeta, 0.0);
}

TEST(Relaxation, ConstraintHoldsOnRandomInputs) {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 5000; ++i) {
    const double qbar = 1.0 + 10 * u(rng), E_bar = 1.0 + 10 * u(rng), H = 5 * u(rng), dt = u(rng);
    const double E_next = 1.0 + 12 * u(rng);
    const auto r = relax_q(qbar, E_bar, H, E_next, dt);
    EXPECT_GE(r.zeta, 0.0);
    EXPECT_LE(r.zeta, 1.0);
    EXPECT_LE((r.q_next - qbar) / dt, qbar / E_bar * H + 1e-12 * std::max(1.0, qbar));
    if (r.case_id != 3) EXPECT_EQ(r.q_next, E_next);
  }
}

TEST(Relaxation, NegativeDissipationIsAConsistencyError) {
  EXPECT_THROW(relax_q(2.0, 2.0, -50.0, 3.0, 0.1), ConsistencyError);
  const auto r = relax_q(2.0, 2.0, -50.0, 3.0, 0.1, false);
  EXPECT_GE(r.zeta, 0.0);
  EXPECT_LE(r.zeta, 1.0);
}

TEST(Startup, InitialAuxiliaryIsEnergy) {
  const auto g = Grid::periodic(2, 16);
  ModelParams p;
  auto s = make_state(g, p, 1, 0.1);
  EXPECT_TRUE(startup(s, RealField(g, 1.0), RealField(g, 0.0)).empty());
  EXPECT_EQ(s.q, 1.0);
  EXPECT_EQ(s.step_index, 0);
  EXPECT_EQ(s.history_phi.size(), 1u);
}

TEST(Startup, OrderRamp) {
  const auto g = Grid::periodic(2, 16);
  const auto p = stability_params();
  auto s = make_state(g, p, 3, 0.1, 1);
  auto [phi, u] = disk(g);
  startup(s, phi, u);
  std::vector<int> orders;
  std::vector<std::size_t> levels;
  for (int i = 0; i < 4; ++i) {
    orders.push_back(advance(s).order);
    levels.push_back(s.history_phi.size());
  }
  EXPECT_EQ(orders, (std::vector<int>{1, 2, 3, 3}));
  EXPECT_EQ(levels, (std::vector<std::size_t>{2, 3, 3, 3}));
}

TEST(Startup, RefinedHistoryForHigherOrder) {
  const auto g = Grid::periodic(2, 16);
  const auto p = stability_params();
  const double dt = 0.04;
  auto s = make_state(g, p, 3, dt, 0);
  EXPECT_EQ(s.options.resolved_substeps(), 20);
  auto [phi, u] = disk(g);
  const auto fine = startup(s, phi, u);
  EXPECT_EQ(fine.size(), 40u);
  EXPECT_EQ(s.step_index, 2);
  EXPECT_DOUBLE_EQ(s.time, 2 * dt);
  EXPECT_EQ(s.history_phi.size(), 3u);
  EXPECT_NEAR(fine.back().t, 2 * dt, 1e-12);
  EXPECT_EQ(s.q, fine.back().q);
  const auto r = advance(s);
  EXPECT_EQ(r.step, 3);
  EXPECT_EQ(r.order, 3);
}

TEST(Advance, RequiresStartup) {
  const auto g = Grid::periodic(2, 8);
  auto s = make_state(g, ModelParams{}, 1, 0.1);
  EXPECT_THROW(advance(s), std::logic_error);
}

TEST(Advance, EquilibriumUnchanged) {
  const auto g = Grid::periodic(2, 16);
  for (double sign : {1.0, -1.0}) {
    for (int k = 1; k <= 3; ++k) {
      auto s = make_state(g, stability_params(), k, 0.5);
      startup(s, RealField(g, sign), RealField(g, 0.0));
      for (int n = 0; n < 5; ++n) {
        const auto r = advance(s);
        EXPECT_EQ(r.E, 1.0);
        EXPECT_EQ(r.q, 1.0);
        EXPECT_EQ(r.xi, 1.0);
        EXPECT_EQ(r.eta, 1.0);
        EXPECT_LT(max_abs(difference(s.phi(), RealField(g, sign))), 1e-12);
        EXPECT_LT(max_abs(s.u()), 1e-12);
      }
    }
  }
}

TEST(Advance, CostContractTwoSolvesPerStep) {
  const auto g = Grid::periodic(2, 32);
  auto s = make_state(g, stability_params(), 3, 0.1, 0);
  auto [phi, u] = disk(g);
  startup(s, phi, u);
  for (int n = 0; n < 6; ++n) {
    const long before = s.linear_solves;
    advance(s);
    EXPECT_EQ(s.linear_solves - before, 2);
  }
}

TEST(Advance, StabilityRunDissipatesQFor1000Steps) {
  const auto g = Grid::periodic(2, 64);
  auto s = make_state(g, stability_params(), 1, 0.1);
  auto [phi, u] = disk(g);
  startup(s, phi, u);
  double q_prev = s.q;
  for (int n = 0; n < 1000; ++n) {
    const auto r = advance(s);
    ASSERT_GT(r.qbar, 0.0);
    ASSERT_LE(r.q, q_prev * (1.0 + 1e-12)) << "step " << r.step;
    q_prev = r.q;
  }
  EXPECT_EQ(s.monotonicity_warnings, 0);
}

TEST(Advance, BoundedOver1000Steps) {
  const auto g = Grid::periodic(2, 32);
  auto s = make_state(g, stability_params(), 2, 0.2, 0);
  auto [phi, u] = disk(g);
  startup(s, phi, u);
  double g_max = 0.0, u_max = 0.0;
  for (int n = 0; n < 10; ++n) {
    advance(s);
    g_max = std::max(g_max, grad_norm_sq(s.phi()));
    u_max = std::max(u_max, l2_norm_sq(s.u()));
  }
  for (int n = 10; n < 1000; ++n) {
    advance(s);
    if (n % 10 == 0) {
      ASSERT_LE(grad_norm_sq(s.phi()), 10 * g_max);
      ASSERT_LE(l2_norm_sq(s.u()), 10 * u_max);
    }
  }
}

TEST(Advance, IsotropicRandomDataEnergyDecays) {
  const auto g = Grid::periodic(2, 32);
  ModelParams p;
  p.tau = 1.0;
  p.eps = 0.5;
  p.s1 = 1.0;
  p.s2 = 2.0;
  for (int k = 1; k <= 3; ++k) {
    auto s = make_state(g, p, k, 1e-3, 0);
    startup(s, smooth_random(g, 4, 0.2), smooth_random(g, 5, 0.1));
    double E_prev = energy_total(s.phi(), s.u(), p);
    for (int n = 0; n < 100; ++n) {
      const auto r = advance(s);
      ASSERT_LE(r.E, E_prev * (1.0 + 1e-12)) << "k=" << k << " step " << r.step;
      EXPECT_NE(r.zeta_case, 3);
      E_prev = r.E;
    }
  }
}

TEST(Advance, CaseOneAndTwoTrackEnergy) {
  const auto g = Grid::periodic(2, 32);
  auto s = make_state(g, stability_params(), 2, 0.1, 0);
  auto [phi, u] = disk(g);
  startup(s, phi, u);
  for (int n = 0; n < 30; ++n) {
    const auto r = advance(s);
    if (r.zeta_case != 3) EXPECT_EQ(r.q, r.E);
    EXPECT_TRUE(std::isfinite(r.E) && std::isfinite(r.q) && std::isfinite(r.area));
  }
}

TEST(Advance, Deterministic) {
  const auto g = Grid::periodic(2, 32);
  auto run = [&] {
    auto s = make_state(g, stability_params(), 3, 0.1, 0);
    auto [phi, u] = disk(g);
    startup(s, phi, u);
    for (int n = 0; n < 20; ++n) advance(s);
    return s.phi().values;
  };
  EXPECT_EQ(run(), run());
}

TEST(Advance, Step2DebugSwitchFreezesQ) {
  const auto g = Grid::periodic(2, 32);
  SchemeOptions o;
  o.dt = 0.1;
  o.step2 = false;
  StepperState s(g, stability_params(), o);
  auto [phi, u] = disk(g);
  startup(s, phi, u);
  const double q0 = s.q;
  const auto r = advance(s);
  EXPECT_EQ(r.eta, 1.0);
  EXPECT_EQ(r.q, q0);
}

TEST(Advance, NonFiniteStateRaisesDivergenceWithStep) {
  const auto g = Grid::periodic(2, 16);
  auto s = make_state(g, stability_params(), 1, 0.1);
  RealField phi(g, 0.0);
  phi[3] = std::numeric_limits<double>::quiet_NaN();
  startup(s, RealField(g, 1.0), RealField(g, 0.0));
  s.history_phi.front() = phi;
  try {
    advance(s);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.step, 1);
  }
}

TEST(Advance, ThreeDimensional) {
  const auto g = Grid::periodic(3, 16);
  auto p = stability_params();
  auto s = make_state(g, p, 2, 0.1, 0);
  auto phi = sample(g, [](double x, double y, double z) {
    return std::tanh((1.5 - std::sqrt((x - pi) * (x - pi) + (y - pi) * (y - pi) + (z - pi) * (z - pi))) / 0.3);
  });
  startup(s, phi, RealField(g, -0.55));
  double q_prev = s.q;
  for (int n = 0; n < 5; ++n) {
    const auto r = advance(s);
    EXPECT_LE(r.q, q_prev * (1 + 1e-12));
    q_prev = r.q;
  }
}
