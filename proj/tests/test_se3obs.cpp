#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "geoest/dynamics.hpp"
#include "geoest/rng.hpp"
#include "geoest/se3obs.hpp"

using namespace geoest;

namespace {

RigidBodyParams small_sat() {
  RigidBodyParams p;
  p.mass = 21.0;
  p.j = Vec3(2.56, 3.01, 2.98).asDiagonal();
  return p;
}

// asteroid scenario, normalized: lengths / a, mu / a^3
struct AsteroidWorld {
  RigidBodyParams params = small_sat();
  SphericalGravity gravity;
  TruthState truth;

  AsteroidWorld() {
    const double a = 330e3;
    gravity.mu = 1.729e10 / (a * a * a);
    gravity.min_radius = 1.0 / a;
    gravity.inertia_force_terms = false;
    const double rp = 310e3 / a;
    const double vp = std::sqrt(-gravity.mu / 1.0 + 2.0 * gravity.mu / rp);
    const Vec3 b0 = rp * Vec3(1.0 / 3, -2.0 / 3, 2.0 / 3);
    const Vec3 w(0, 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0));
    const Rotation r0 = exp_so3(Vec3(0.4, 0.2, 0.1));
    truth.g = Pose(r0, b0);
    truth.xi = Twist(1e-3 * Vec3(7, -4, 1),
                     Vec3(r0.matrix().transpose() *
                          (vp * w.cross(Vec3(b0 / rp)))));
  }

  ForceModel force() const {
    ForceModel f;
    f.gravity = gravity;
    return f;
  }
};

std::vector<FullStateMeasurement> truth_measurements(
    const std::vector<TruthState>& traj) {
  std::vector<FullStateMeasurement> out;
  for (const TruthState& s : traj) {
    out.push_back(FullStateMeasurement{s.g, s.xi, s.t});
  }
  return out;
}

GravityObserverGains paper_gravity_gains() {
  GravityObserverGains g;
  g.k1 = GravityObserverGains::block_diag(1.12, 1.0);
  g.k2 = 1.0;
  g.k3 = 0.2;
  g.k4 = GravityObserverGains::block_diag(1.2, 1.0);
  return g;
}

}  // namespace

TEST_CASE("gravity observer equilibrium", "[se3obs]") {
  AsteroidWorld world;
  const FullStateMeasurement m{world.truth.g, world.truth.xi, 0.0};
  GravityObserverState s =
      gravity_observer_init(world.truth.g, world.truth.xi,
                            world.gravity.mu, m);
  const GravityObserverDerivs d =
      gravity_observer_rhs(s, m, world.params, paper_gravity_gains(),
                           world.gravity);
  // at zero error with the true mu, the observer reproduces the plant
  const DynamicsDerivative truth_d =
      dynamics_rhs(world.truth, world.params, world.force());
  REQUIRE((d.ghat_twist - world.truth.xi.vector()).norm() < 1e-12);
  REQUIRE((d.breve_xi_dot -
           world.params.big_i().inverse() * truth_d.i_xi_dot)
              .norm() < 1e-12);
  REQUIRE(std::abs(d.muhat_dot) < 1e-12);
  REQUIRE(gravity_observer_lyapunov(s, m, world.params, paper_gravity_gains(),
                                    world.gravity.mu) < 1e-20);
}

TEST_CASE("gravity observer Lyapunov rate (scalar gains)", "[se3obs]") {
  // with scalar k1 and k4 the decay rate is exactly
  // -k1 k2 |eta|^2 - k4 |ell|^2
  AsteroidWorld world;
  GravityObserverGains gains;
  gains.k1 = GravityObserverGains::block_diag(1.1, 1.1);
  gains.k2 = 1.0;
  gains.k3 = 0.2;
  gains.k4 = GravityObserverGains::block_diag(1.3, 1.3);

  const double h = 1e-4;
  const auto traj =
      integrate_truth(world.truth, world.params, world.force(), h, 2);
  const auto meas = truth_measurements(traj);
  GravityObserverState s = gravity_observer_init(
      Pose(exp_so3(Vec3(0.05, -0.1, 0.2)),
           world.truth.g.b + Vec3(0.01, -0.02, 0.005)),
      Twist(Vec6(world.truth.xi.vector() + 0.01 * Vec6::Ones())),
      2.0 * world.gravity.mu, meas[0]);

  const double v0 = gravity_observer_lyapunov(s, meas[0], world.params, gains,
                                              world.gravity.mu);
  const GravityObserverState s1 = gravity_observer_step(
      s, meas[0], meas[1], world.params, gains, world.gravity);
  const GravityObserverState s2 = gravity_observer_step(
      s1, meas[1], meas[2], world.params, gains, world.gravity);
  const double v2 = gravity_observer_lyapunov(s2, meas[2], world.params, gains,
                                              world.gravity.mu);
  const double fd = (v2 - v0) / (2.0 * h);

  const GravityObserverDerivs d =
      gravity_observer_rhs(s1, meas[1], world.params, gains, world.gravity);
  const double expected =
      -1.1 * gains.k2 * d.eta.vector().squaredNorm() -
      1.3 * d.ell.squaredNorm();
  REQUIRE(fd == Catch::Approx(expected).epsilon(1e-5));
}

TEST_CASE("gravity observer ell-dynamics consistency", "[se3obs]") {
  // the derived identity II d(ell)/dt = ad*_ell II xi + mu_tilde psi
  // - k2 G^T eta - k4 ell, checked against a finite difference
  AsteroidWorld world;
  const GravityObserverGains gains = paper_gravity_gains();
  const double h = 1e-4;
  const auto traj =
      integrate_truth(world.truth, world.params, world.force(), h, 2);
  const auto meas = truth_measurements(traj);
  GravityObserverState s = gravity_observer_init(
      Pose(exp_so3(Vec3(0.1, 0.05, -0.08)), 0.95 * world.truth.g.b),
      Twist(Vec6(1.02 * world.truth.xi.vector())), 3.0 * world.gravity.mu,
      meas[0]);
  const GravityObserverState s1 = gravity_observer_step(
      s, meas[0], meas[1], world.params, gains, world.gravity);
  const GravityObserverState s2 = gravity_observer_step(
      s1, meas[1], meas[2], world.params, gains, world.gravity);

  auto ell_of = [&](const GravityObserverState& st,
                    const FullStateMeasurement& m) {
    const ExpCoords eta = log_se3(st.ghat.inverse() * m.g);
    return Vec6(m.xi.vector() - st.breve_xi.vector() +
                gains.k1 * eta.vector());
  };
  const Vec6 fd = (ell_of(s2, meas[2]) - ell_of(s, meas[0])) / (2.0 * h);
  const GravityObserverDerivs d =
      gravity_observer_rhs(s1, meas[1], world.params, gains, world.gravity);
  const Mat6 ii = world.params.big_i();
  const Vec6 expected =
      ii.inverse() *
      (ad(d.ell).transpose() * (ii * meas[1].xi.vector()) +
       (world.gravity.mu - s1.muhat) * psi_g(meas[1].g, world.params,
                                             world.gravity) -
       gains.k2 * g_matrix(d.eta).transpose() * d.eta.vector() -
       gains.k4 * d.ell);
  REQUIRE((fd - expected).norm() < 1e-4 * std::max(1.0, expected.norm()));
}

TEST_CASE("gravity observer short-horizon convergence", "[se3obs]") {
  AsteroidWorld world;
  const double a = 330e3;
  const double h = 0.05;
  const int n = 1600;  // 80 s
  const auto traj =
      integrate_truth(world.truth, world.params, world.force(), 0.5 * h, 2 * n);
  const auto meas = truth_measurements(traj);
  GravityObserverState s = gravity_observer_init(
      Pose(Rotation::identity(), Vec3(103e3, -206e3, 206e3) / a),
      Twist(1e-3 * Vec3(5, -7, 3), Vec3(59, -19, -27) / a),
      1.6172e14 / (a * a * a), meas[0]);
  const GravityObserverGains gains = paper_gravity_gains();
  double v_prev = gravity_observer_lyapunov(s, meas[0], world.params, gains,
                                            world.gravity.mu);
  for (int i = 0; i < n; ++i) {
    s = gravity_observer_step(s, meas[2 * i], meas[2 * i + 1],
                              meas[2 * i + 2], world.params, gains,
                              world.gravity);
    const double v = gravity_observer_lyapunov(s, meas[2 * i + 2],
                                               world.params, gains,
                                               world.gravity.mu);
    // strictly decreasing while the errors are far from zero
    if (v > 1e-12) REQUIRE(v < v_prev + 1e-9 * std::max(1.0, v_prev));
    v_prev = v;
  }
  const ExpCoords eta = log_se3(s.ghat.inverse() * traj[2 * n].g);
  REQUIRE(eta.vector().norm() < 1e-4);
}

TEST_CASE("force observer equilibrium and Lyapunov rate", "[se3obs]") {
  RigidBodyParams params = small_sat();
  ForceModel fm;
  fm.prescribed = [](double t) {
    Vec6 w;
    w << 0.07, 0.0687, 0.02, 0.4, 0.5, 0.768;
    return Vec6(w * std::cos(0.3 * t));
  };
  fm.uniform_gravity_mps2 = 9.81;
  WrenchFn wrench = [&](const Pose& g, double t) {
    return external_wrench(g, params, fm, t);
  };
  TruthState truth;
  truth.g = Pose(exp_so3(0.1 * Vec3(4, 2, 1)), Vec3(1, 2, 3));
  truth.xi = Twist(Vec3(0.5, -0.5, 0.1), 1e-3 * Vec3(-5, 25, 30));

  // zero-error equilibrium
  {
    const FullStateMeasurement m{truth.g, truth.xi, 0.0};
    ForceObserverState s = force_observer_init(truth.g, truth.xi, m);
    ForceObserverGains gains;
    const ForceObserverDerivs d =
        force_observer_rhs(s, m, wrench(m.g, 0.0), params, gains);
    const DynamicsDerivative td = dynamics_rhs(truth, params, fm);
    REQUIRE((d.ghat_twist - truth.xi.vector()).norm() < 1e-12);
    REQUIRE((d.breve_xi_dot - params.big_i().inverse() * td.i_xi_dot).norm() <
            1e-10);
  }
  // FD of V matches -k1 eta^T K eta - k3 u^T K u, including k2 != 1
  for (double k2 : {1.0, 2.5}) {
    ForceObserverGains gains;
    gains.k1 = 0.8;
    gains.k2 = k2;
    gains.k3 = 1.7;
    const double h = 1e-4;
    const auto traj = integrate_truth(truth, params, fm, h, 2);
    const auto meas = truth_measurements(traj);
    ForceObserverState s = force_observer_init(
        Pose(exp_so3(Vec3(0.2, -0.1, 0.15)), truth.g.b + Vec3(0.3, -0.2, 0.1)),
        Twist(Vec6(truth.xi.vector() + 0.1 * Vec6::Ones())), meas[0]);
    const ForceObserverState s1 =
        force_observer_step(s, meas[0], meas[1], wrench, params, gains);
    const ForceObserverState s2 =
        force_observer_step(s1, meas[1], meas[2], wrench, params, gains);
    const double v0 = force_observer_lyapunov(s, meas[0], params, gains);
    const double v2 = force_observer_lyapunov(s2, meas[2], params, gains);
    const double fd = (v2 - v0) / (2.0 * h);
    const Pose hp = s1.ghat.inverse() * meas[1].g;
    const ExpCoords eta = log_se3(hp);
    const Vec6 xi_tilde = meas[1].xi.vector() - s1.breve_xi.vector();
    const Vec6 u = gains.k1 * eta.vector() + xi_tilde;
    const Mat6 km = gains.kmat();
    const double expected =
        -gains.k1 * eta.vector().dot(km * eta.vector()) -
        gains.k3 * u.dot(km * u);
    REQUIRE(fd == Catch::Approx(expected).epsilon(1e-5));
  }
  // bounded estimate error under a bounded unmodeled torque; the truth
  // stays on a bounded trajectory (oscillatory wrench, no free fall)
  {
    ForceObserverGains gains;
    ForceModel bounded;
    bounded.prescribed = fm.prescribed;
    ForceModel disturbed = bounded;
    auto nominal = bounded.prescribed;
    disturbed.prescribed = [nominal](double t) {
      Vec6 d = nominal(t);
      d.head<3>() += 0.01 * std::sin(0.5 * t) * Vec3(0.424, 0.9, 0.1);
      return d;
    };
    WrenchFn known = [&](const Pose& g, double t) {
      return external_wrench(g, params, bounded, t);
    };
    const double h = 0.01;
    const int n = 6000;  // 60 s
    const auto traj = integrate_truth(truth, params, disturbed, h, n);
    const auto meas = truth_measurements(traj);
    ForceObserverState s = force_observer_init(
        Pose(exp_so3(Vec3(0.2, -0.1, 0.15)), truth.g.b + Vec3(0.3, -0.2, 0.1)),
        truth.xi, meas[0]);
    double sup_err = 0.0;
    for (int i = 0; i < n; ++i) {
      s = force_observer_step(s, meas[i], meas[i + 1], known, params, gains);
      if (i > n / 2) {
        const ExpCoords eta = log_se3(s.ghat.inverse() * traj[i + 1].g);
        sup_err = std::max(sup_err, eta.vector().norm());
      }
    }
    REQUIRE(sup_err < 0.05);
  }
}

TEST_CASE("finite-time observer basics", "[se3obs]") {
  RigidBodyParams params = small_sat();
  ForceModel fm;
  fm.prescribed = [](double) {
    Vec6 w;
    w << 0.07, 0.0687, 0.02, 0.4, 0.5, 0.768;
    return w;
  };
  fm.uniform_gravity_mps2 = 9.81;
  WrenchFn wrench = [&](const Pose& g, double t) {
    return external_wrench(g, params, fm, t);
  };
  FiniteTimeGains gains;
  gains.k = 50.0;
  gains.p_num = 23;
  gains.p_den = 21;
  gains.gamma = 0.03;
  gains.validate();

  TruthState truth;
  truth.g = Pose(exp_so3(0.1 * Vec3(4, 2, 1)), Vec3(1, 2, 3));
  truth.xi = Twist(Vec3(0.5, -0.5, 0.1), 1e-3 * Vec3(-5, 25, 30));

  // zero error with the guard active stays exactly zero
  {
    const double h = 0.01;
    const auto traj = integrate_truth(truth, params, fm, 0.5 * h, 100);
    const auto meas = truth_measurements(traj);
    FiniteTimeState s = finite_time_init(truth.g, truth.xi, meas[0]);
    REQUIRE(s.eta_tilde.norm() < 1e-14);
    for (int i = 0; i < 50; ++i) {
      s = finite_time_observer_step(s, meas[2 * i], meas[2 * i + 1],
                                    meas[2 * i + 2], wrench, params, gains);
      REQUIRE(s.eta_tilde.norm() == 0.0);
      REQUIRE((s.breve_xi.vector() - meas[2 * i + 2].xi.vector()).norm() ==
              0.0);
    }
  }
  // time to V < 1e-10 shrinks as k grows (co-propagated plant; the
  // k = 100 gain needs the finer step to stay inside the explicit
  // scheme's stability region)
  {
    const double h = 0.005;
    const int n = 600;
    auto time_to_converge = [&](double k) {
      FiniteTimeGains g2 = gains;
      g2.k = k;
      TruthState plant = truth;
      FiniteTimeState s = finite_time_init(
          Pose(), Twist(), FullStateMeasurement{plant.g, plant.xi, 0.0});
      for (int i = 0; i < n; ++i) {
        auto [p1, s1] = finite_time_coupled_step(plant, s, params, fm, wrench,
                                                 params, g2, h);
        plant = p1;
        s = s1;
        if (finite_time_lyapunov(s, plant.xi.vector(), params, g2) < 1e-10) {
          return (i + 1) * h;
        }
      }
      return 1e9;
    };
    const double t10 = time_to_converge(10.0);
    const double t50 = time_to_converge(50.0);
    const double t100 = time_to_converge(100.0);
    REQUIRE(t10 < 1e9);
    REQUIRE(t50 < t10);
    REQUIRE(t100 < t50);
  }
  // invalid gain combinations are rejected
  {
    FiniteTimeGains bad = gains;
    bad.p_num = 24;
    REQUIRE_THROWS_AS(bad.validate(), Error);
    bad = gains;
    bad.p_num = 43;  // p > 2
    REQUIRE_THROWS_AS(bad.validate(), Error);
    bad = gains;
    bad.k = -1.0;
    REQUIRE_THROWS_AS(bad.validate(), Error);
  }
}

TEST_CASE("lyapunov_value positivity", "[se3obs]") {
  RigidBodyParams params = small_sat();
  CounterRng rng(71, 0, 0);
  FiniteTimeGains ft;
  ft.k = 50.0;
  ft.gamma = 0.03;
  GravityObserverGains gg = paper_gravity_gains();
  ForceObserverGains fg;
  AsteroidWorld world;
  for (int i = 0; i < 10000; ++i) {
    const Pose g(exp_so3(rng.uniform(0, 2.9) * rng.unit_vector()),
                 Vec3(rng.uniform(0.5, 2), rng.uniform(-1, 1),
                      rng.uniform(-1, 1)));
    const Twist xi(0.3 * rng.unit_vector(), 0.2 * rng.unit_vector());
    const FullStateMeasurement m{g, xi, 0.0};
    // a perturbed observer state
    const Pose ghat(g.r * exp_so3(rng.uniform(0, 0.5) * rng.unit_vector()),
                    g.b + 0.1 * rng.unit_vector());
    const Twist xihat(Vec6(xi.vector() + 0.1 * Vec6::Random()));

    GravityObserverState gs = gravity_observer_init(
        ghat, xihat, world.gravity.mu * rng.uniform(0.5, 2.0), m);
    const double vg = gravity_observer_lyapunov(gs, m, params, gg,
                                                world.gravity.mu);
    REQUIRE(vg >= 0.0);

    ForceObserverState fs = force_observer_init(ghat, xihat, m);
    REQUIRE(force_observer_lyapunov(fs, m, params, fg) >= 0.0);

    FiniteTimeState fts = finite_time_init(ghat, xihat, m);
    REQUIRE(finite_time_lyapunov(fts, xi.vector(), params, ft) >= 0.0);
  }
  // zero at zero error only
  const FullStateMeasurement m{world.truth.g, world.truth.xi, 0.0};
  GravityObserverState gs = gravity_observer_init(
      world.truth.g, world.truth.xi, world.gravity.mu, m);
  REQUIRE(gravity_observer_lyapunov(gs, m, params, gg, world.gravity.mu) <
          1e-24);
}
