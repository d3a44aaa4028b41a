// geoest - run_scenario / compare_filters implementation.
#pragma once

#include <limits>

#include "geoest/harness.hpp"

namespace geoest {

namespace harness_detail {

inline ObserverTrace run_gravity_observer(const FilterSpec& spec,
                                          const Scenario& sc,
                                          const std::vector<FullStateMeasurement>&
                                              meas) {
  if (!sc.truth.gravity) {
    throw ConfigError("gravity_observer needs truth.gravity_mu");
  }
  const ConfigSection& p = spec.params;
  GravityObserverGains gains;
  gains.k1 = GravityObserverGains::block_diag(p.get_double("k1_rot", 1.0),
                                              p.get_double("k1_trans", 1.0));
  gains.k2 = p.get_double("k2", 1.0);
  gains.k3 = p.get_double("k3", 1.0);
  gains.k4 = GravityObserverGains::block_diag(p.get_double("k4_rot", 1.0),
                                              p.get_double("k4_trans", 1.0));
  const Pose ghat0(p.has("rhat0_rotvec_rad")
                       ? exp_so3(p.get_vec3("rhat0_rotvec_rad"))
                       : Rotation::identity(),
                   p.get_vec3("bhat0", Vec3::Zero()));
  const Twist xihat0(p.get_vec3("omegahat0_rad_s", Vec3::Zero()),
                     p.get_vec3("vhat0", Vec3::Zero()));
  GravityObserverState state =
      gravity_observer_init(ghat0, xihat0, p.get_double("muhat0"), meas[0]);

  const std::size_t n_rows = meas.size() / 2 + 1;
  ObserverTrace out;
  out.rows.resize(n_rows);
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < n_rows; ++i) {
    const Pose h = state.ghat.inverse() * meas[2 * i].g;
    out.rows[i] = ObserverRow{
        state.ghat,
        Twist(Vec6(adjoint_Ad(h) * state.breve_xi.vector())),
        state.muhat, RowStatus::Ok};
    if (i + 1 < n_rows) {
      state = gravity_observer_step(state, meas[2 * i], meas[2 * i + 1],
                                    meas[2 * i + 2], sc.truth.params, gains,
                                    *sc.truth.gravity);
    }
  }
  out.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             t0)
                   .count();
  return out;
}

inline ObserverTrace run_force_observer(const FilterSpec& spec,
                                        const Scenario& sc,
                                        const std::vector<FullStateMeasurement>&
                                            meas) {
  const ConfigSection& p = spec.params;
  ForceObserverGains gains;
  gains.k1 = p.get_double("k1", 1.0);
  gains.k2 = p.get_double("k2", 1.0);
  gains.k3 = p.get_double("k3", 1.0);
  const Pose ghat0(p.has("rhat0_rotvec_rad")
                       ? exp_so3(p.get_vec3("rhat0_rotvec_rad"))
                       : Rotation::identity(),
                   p.get_vec3("bhat0", Vec3::Zero()));
  const Twist xihat0(p.get_vec3("omegahat0_rad_s", Vec3::Zero()),
                     p.get_vec3("vhat0", Vec3::Zero()));
  ForceObserverState state = force_observer_init(ghat0, xihat0, meas[0]);
  const ForceModel nominal = sc.truth.nominal_force_model();
  const RigidBodyParams params = sc.truth.params;
  WrenchFn wrench = [nominal, params](const Pose& g, double t) -> Vec6 {
    return external_wrench(g, params, nominal, t);
  };

  const std::size_t n_rows = meas.size() / 2 + 1;
  ObserverTrace out;
  out.rows.resize(n_rows);
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < n_rows; ++i) {
    const Pose h = state.ghat.inverse() * meas[2 * i].g;
    out.rows[i] = ObserverRow{
        state.ghat, Twist(Vec6(adjoint_Ad(h) * state.breve_xi.vector())), 0.0,
        RowStatus::Ok};
    if (i + 1 < n_rows) {
      state = force_observer_step(state, meas[2 * i], meas[2 * i + 1],
                                  meas[2 * i + 2], wrench, params, gains);
    }
  }
  out.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             t0)
                   .count();
  return out;
}

inline ObserverTrace run_finite_time(const FilterSpec& spec, const Scenario& sc,
                                     const TruthSeries& truth,
                                     const StateNoise& noise) {
  const ConfigSection& p = spec.params;
  FiniteTimeGains gains;
  gains.k = p.get_double("k", 1.0);
  gains.p_num = static_cast<int>(p.get_double("p_num", 23));
  gains.p_den = static_cast<int>(p.get_double("p_den", 21));
  gains.gamma = p.get_double("gamma", 1.0);
  gains.guard = p.get_double("guard", 1e-9);
  gains.validate();
  if (!truth.has_se3) {
    throw ConfigError("finite_time needs a rigid_body truth");
  }
  const Pose ghat0(p.has("rhat0_rotvec_rad")
                       ? exp_so3(p.get_vec3("rhat0_rotvec_rad"))
                       : Rotation::identity(),
                   p.get_vec3("bhat0", Vec3::Zero()));
  const Twist xihat0(p.get_vec3("omegahat0_rad_s", Vec3::Zero()),
                     p.get_vec3("vhat0", Vec3::Zero()));
  const ForceModel nominal = sc.truth.nominal_force_model();
  const ForceModel plant_force = sc.truth.force_model();
  const RigidBodyParams params = sc.truth.params;
  WrenchFn wrench = [nominal, params](const Pose& g, double t) -> Vec6 {
    return external_wrench(g, params, nominal, t);
  };
  const std::uint64_t seed = sc.seed;
  // the observer receives one corrupted sample per step: the corruption
  // evaluated at the step start is held across the integration stages
  double hold_t = 0.0;
  std::function<FullStateMeasurement(const TruthState&)> corrupt =
      [noise, seed, &hold_t](const TruthState& s) {
        TruthState held = s;
        held.t = hold_t;
        FullStateMeasurement m = noise.apply(held, seed);
        m.t = s.t;
        return m;
      };
  const auto* corrupt_ptr = noise.enabled ? &corrupt : nullptr;

  // co-propagated plant: the observer reads the plant's RK4 stage values
  TruthState plant = truth.se3.front();
  FiniteTimeState state =
      finite_time_init(ghat0, xihat0, noise.apply(plant, seed));

  const std::size_t n_rows = truth.se3.size();
  ObserverTrace out;
  out.rows.resize(n_rows);
  out.plant.resize(n_rows);
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < n_rows; ++i) {
    out.plant[i] = plant;
    const FullStateMeasurement m = noise.apply(plant, seed);
    const Pose ghat = state.ghat(m.g);
    const Pose h = ghat.inverse() * m.g;
    out.rows[i] = ObserverRow{
        ghat, Twist(Vec6(adjoint_Ad(h) * state.breve_xi.vector())), 0.0,
        RowStatus::Ok};
    if (i + 1 < n_rows) {
      hold_t = plant.t;
      auto [plant_next, state_next] = finite_time_coupled_step(
          plant, state, params, plant_force, wrench, params, gains, sc.h,
          corrupt_ptr);
      plant = plant_next;
      state = state_next;
    }
  }
  out.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             t0)
                   .count();
  return out;
}

inline bool is_attitude_filter(FilterKind k) {
  switch (k) {
    case FilterKind::VarEstImplicit:
    case FilterKind::VarEstExplicit:
    case FilterKind::VarEstSymmetric:
    case FilterKind::VarEstBias:
    case FilterKind::Game:
    case FilterKind::Mekf:
    case FilterKind::Cgo:
      return true;
    default:
      return false;
  }
}

inline TimedTrace run_attitude_filter(const FilterSpec& spec,
                                      const Scenario& sc, const FrameSet& fs) {
  switch (spec.kind) {
    case FilterKind::VarEstImplicit:
    case FilterKind::VarEstExplicit:
    case FilterKind::VarEstSymmetric:
    case FilterKind::VarEstBias:
      return run_varest(spec, sc, fs);
    case FilterKind::Game:
    case FilterKind::Mekf:
      return run_covariance_filter(spec, sc, fs);
    case FilterKind::Cgo:
      return run_cgo(spec, sc, fs);
    default:
      throw Error("not an attitude filter");
  }
}

inline void finalize_flags(FilterSeries& s, double h) {
  // "singular" also covers a principal angle above 170 degrees sustained
  // for one second
  const double thresh = 170.0 * std::numbers::pi / 180.0;
  const int need = std::max(1, static_cast<int>(std::llround(1.0 / h)));
  int streak = 0;
  for (std::size_t i = 0; i < s.phi.size(); ++i) {
    streak = (s.phi[i] > thresh) ? streak + 1 : 0;
    if (streak >= need) {
      s.singular = true;
      for (std::size_t j = i; j < s.status.size(); ++j) {
        if (s.status[j] == RowStatus::Ok) s.status[j] = RowStatus::Singular;
      }
      break;
    }
  }
  for (RowStatus st : s.status) {
    if (st == RowStatus::Singular) s.singular = true;
  }
  const std::size_t n = s.phi.size();
  const std::size_t tail = std::max<std::size_t>(1, n / 10);
  double acc = 0.0;
  for (std::size_t i = n - tail; i < n; ++i) acc += s.phi[i];
  s.converged = !s.singular && (acc / tail) < 5.0 * std::numbers::pi / 180.0;
}

}  // namespace harness_detail

inline RunResult run_scenario(const Scenario& sc) {
  using namespace harness_detail;
  if (sc.duration < sc.h || sc.h <= 0.0) {
    throw ConfigError("scenario duration/h invalid");
  }
  const TruthSeries truth = make_truth(sc);

  bool any_attitude = false;
  bool any_observer = false;
  for (const FilterSpec& f : sc.filters) {
    (is_attitude_filter(f.kind) ? any_attitude : any_observer) = true;
  }
  FrameSet fs;
  if (any_attitude) fs = make_frames(sc, truth);
  std::vector<FullStateMeasurement> state_meas;
  if (any_observer) {
    state_meas = make_state_measurements(sc, truth, parse_state_noise(sc));
  }

  RunResult out;
  out.scenario_name = sc.name;
  const int n = sc.steps();
  for (const FilterSpec& spec : sc.filters) {
    FilterSeries s;
    s.name = spec.name;
    s.t.reserve(n + 1);
    for (int i = 0; i <= n; ++i) s.t.push_back(i * sc.h);
    try {
      if (is_attitude_filter(spec.kind)) {
        const TimedTrace trace = run_attitude_filter(spec, sc, fs);
        s.wall_s = trace.wall_s;
        s.steps_timed = n;
        for (int i = 0; i <= n; ++i) {
          const AttitudeRow& row = trace.rows[i];
          s.phi.push_back(metric_principal_angle(truth.r[i], row.rhat));
          s.omega_err_norm.push_back((truth.omega[i] - row.omega_hat).norm());
          s.beta_err.push_back(sc.sensors.gyro_noise.bias - row.betahat);
          s.eta_err.push_back(Vec6::Zero());
          s.xi_err.push_back(Vec6::Zero());
          s.mu_err.push_back(0.0);
          s.status.push_back(row.status);
        }
      } else {
        ObserverTrace trace;
        switch (spec.kind) {
          case FilterKind::GravityObserver:
            trace = run_gravity_observer(spec, sc, state_meas);
            break;
          case FilterKind::ForceObserver:
            trace = run_force_observer(spec, sc, state_meas);
            break;
          case FilterKind::FiniteTime:
            trace = run_finite_time(spec, sc, truth, parse_state_noise(sc));
            break;
          default:
            throw Error("unhandled filter kind");
        }
        s.wall_s = trace.wall_s;
        s.steps_timed = n;
        const double mu_true = sc.truth.gravity ? sc.truth.gravity->mu : 0.0;
        for (int i = 0; i <= n; ++i) {
          const ObserverRow& row = trace.rows[i];
          const TruthState& ts =
              trace.plant.empty() ? truth.se3[i] : trace.plant[i];
          s.phi.push_back(metric_principal_angle(ts.g.r, row.ghat.r));
          s.omega_err_norm.push_back((ts.xi.omega - row.xihat.omega).norm());
          s.beta_err.push_back(Vec3::Zero());
          Vec6 eta = Vec6::Zero();
          try {
            eta = log_se3(row.ghat.inverse() * ts.g).vector();
          } catch (const NearPiSingularity&) {
            eta.setConstant(std::numbers::pi);
          }
          s.eta_err.push_back(eta);
          const Pose h = row.ghat.inverse() * ts.g;
          const Vec6 breve = adjoint_Ad(h.inverse()) * row.xihat.vector();
          s.xi_err.push_back(ts.xi.vector() - breve);
          s.mu_err.push_back(spec.kind == FilterKind::GravityObserver
                                 ? mu_true - row.muhat
                                 : 0.0);
          s.status.push_back(row.status);
        }
      }
      finalize_flags(s, sc.h);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error&) {
      // numerical failure: keep whatever rows exist, pad, and flag
      const std::size_t have = s.phi.size();
      for (std::size_t i = have; i < s.t.size(); ++i) {
        s.phi.push_back(std::numeric_limits<double>::quiet_NaN());
        s.omega_err_norm.push_back(std::numeric_limits<double>::quiet_NaN());
        s.beta_err.push_back(Vec3::Zero());
        s.eta_err.push_back(Vec6::Zero());
        s.xi_err.push_back(Vec6::Zero());
        s.mu_err.push_back(0.0);
        s.status.push_back(RowStatus::Failed);
      }
      s.singular = false;
      s.converged = false;
      s.failed = true;
    }
    out.filters.push_back(std::move(s));
  }
  return out;
}

inline BenchmarkReport compare_filters(const Scenario& sc, int repeats) {
  using namespace harness_detail;
  if (sc.filters.size() < 2) {
    throw ConfigError("compare_filters needs at least 2 filters");
  }
  if (repeats < 1) throw ConfigError("compare_filters needs repeats >= 1");
  for (const FilterSpec& f : sc.filters) {
    if (!is_attitude_filter(f.kind)) {
      throw ConfigError("compare_filters supports attitude filters only");
    }
  }
  const TruthSeries truth = make_truth(sc);
  const FrameSet fs = make_frames(sc, truth);
  const int n = sc.steps();

  BenchmarkReport report;
  report.scenario_name = sc.name;
  report.repeats = repeats;
  std::vector<std::vector<double>> totals(sc.filters.size());
  for (int rep = 0; rep < repeats; ++rep) {
    for (std::size_t f = 0; f < sc.filters.size(); ++f) {
      const TimedTrace trace = run_attitude_filter(sc.filters[f], sc, fs);
      totals[f].push_back(trace.wall_s);
    }
  }
  for (std::size_t f = 0; f < sc.filters.size(); ++f) {
    BenchmarkEntry e;
    e.name = sc.filters[f].name;
    std::vector<double> per_step = totals[f];
    for (double& x : per_step) x /= n;
    std::sort(per_step.begin(), per_step.end());
    double mean = 0.0;
    for (double x : totals[f]) mean += x;
    e.total_s = mean / repeats;
    e.per_step_mean_s = e.total_s / n;
    e.per_step_p95_s =
        per_step[std::min(per_step.size() - 1,
                          static_cast<std::size_t>(0.95 * per_step.size()))];
    report.entries.push_back(e);
  }
  std::sort(report.entries.begin(), report.entries.end(),
            [](const BenchmarkEntry& a, const BenchmarkEntry& b) {
              return a.total_s < b.total_s;
            });
  for (const BenchmarkEntry& e : report.entries) {
    report.ordering.push_back(e.name);
  }
  return report;
}

}  // namespace geoest
