// geoest - experiment execution: truth generation, shared measurement
// streams, per-filter runs with isolated timing, metrics, and the
// runtime comparison.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "geoest/baselines.hpp"
#include "geoest/core.hpp"
#include "geoest/dynamics.hpp"
#include "geoest/lie.hpp"
#include "geoest/measurement.hpp"
#include "geoest/scenario.hpp"
#include "geoest/se3obs.hpp"
#include "geoest/varest.hpp"
#include "geoest/wahba.hpp"

namespace geoest {

/// phi = principal angle of R_true Rhat^T.
inline double metric_principal_angle(const Rotation& rtrue,
                                     const Rotation& rhat) {
  return (rtrue * rhat.transposed()).principal_angle();
}

enum class RowStatus { Ok, Singular, Failed };

/// Per-filter output series; vectors share one length and timestamps.
struct FilterSeries {
  std::string name;
  std::vector<double> t;
  std::vector<double> phi;             // rad
  std::vector<double> omega_err_norm;  // rad/s
  std::vector<Vec3> beta_err;          // rad/s
  std::vector<Vec6> eta_err;           // observers only (else zero)
  std::vector<Vec6> xi_err;
  std::vector<double> mu_err;
  std::vector<RowStatus> status;
  bool singular = false;
  bool converged = false;
  bool failed = false;
  double wall_s = 0.0;
  long steps_timed = 0;
};

struct RunResult {
  std::string scenario_name;
  std::vector<FilterSeries> filters;
};

struct BenchmarkEntry {
  std::string name;
  double total_s = 0.0;
  double per_step_mean_s = 0.0;
  double per_step_p95_s = 0.0;
};

struct BenchmarkReport {
  std::string scenario_name;
  int repeats = 1;
  std::vector<BenchmarkEntry> entries;  // sorted fastest first
  std::vector<std::string> ordering;
};

namespace harness_detail {

struct TruthSeries {
  std::vector<Rotation> r;    // N+1
  std::vector<Vec3> omega;    // N+1
  std::vector<TruthState> se3;       // N+1 when the truth is a rigid body
  std::vector<TruthState> se3_half;  // 2N+1, half-step grid
  bool has_se3 = false;
};

inline Rotation initial_attitude(const Scenario& sc) {
  switch (sc.truth.r0_mode) {
    case R0Mode::Identity:
      return Rotation::identity();
    case R0Mode::RotationVector:
      return exp_so3(sc.truth.r0_rotvec);
    case R0Mode::RandomStd: {
      CounterRng rng(sc.seed, kScenarioStream, 0);
      const double angle =
          rng.normal() * sc.truth.r0_std_deg * std::numbers::pi / 180.0;
      return exp_so3(angle * rng.unit_vector());
    }
  }
  throw Error("unreachable");
}

inline TruthSeries make_truth(const Scenario& sc) {
  const int n = sc.steps();
  TruthSeries out;
  out.r.reserve(n + 1);
  out.omega.reserve(n + 1);
  if (sc.truth.kind == TruthKind::PrescribedOmega) {
    Rotation r = initial_attitude(sc);
    for (int i = 0; i <= n; ++i) {
      const double t = i * sc.h;
      out.r.push_back(r);
      out.omega.push_back(prescribed_omega(t));
      r = attitude_profile_step(r, prescribed_omega, t, sc.h);
    }
    return out;
  }
  // rigid-body truth, with any configured disturbance folded in by the
  // scenario's force model
  TruthState s0;
  s0.g = Pose(initial_attitude(sc), sc.truth.b0);
  s0.xi = Twist(sc.truth.omega0, sc.truth.v0);
  s0.t = 0.0;
  // half-step grid so observer integrators get true midpoint samples
  out.se3_half = integrate_truth(s0, sc.truth.params, sc.truth.force_model(),
                                 0.5 * sc.h, 2 * n, TruthMethod::RK4);
  out.has_se3 = true;
  for (int i = 0; i <= n; ++i) {
    out.se3.push_back(out.se3_half[2 * i]);
    out.r.push_back(out.se3_half[2 * i].g.r);
    out.omega.push_back(out.se3_half[2 * i].xi.omega);
  }
  return out;
}

/// Everything a filter needs about one active sensor set.
struct SensorContext {
  std::vector<int> ids;  // raw sensor ids (pre-augmentation)
  DirectionSet e;
  WeightMatrix w;
  std::shared_ptr<AttitudePotential> pot;
  InnovationWeights iw;
};

inline std::vector<int> active_ids_at(const SensorSpec& sp, double t) {
  if (sp.schedule.empty()) {
    std::vector<int> all(sp.e_cols.cols());
    for (int j = 0; j < sp.e_cols.cols(); ++j) all[j] = j;
    return all;
  }
  for (const ActiveWindow& w : sp.schedule) {
    if (t >= w.t_begin && t < w.t_end) return w.ids;
  }
  return sp.schedule.back().ids;
}

inline SensorContext make_context(const SensorSpec& sp,
                                  const std::vector<int>& ids) {
  SensorContext ctx;
  ctx.ids = ids;
  Mat3X raw(3, ids.size());
  for (std::size_t j = 0; j < ids.size(); ++j) {
    raw.col(j) = sp.e_cols.col(ids[j]);
  }
  ctx.e = DirectionSet::from_columns(raw);
  const int k = ctx.e.count();
  switch (sp.w_mode) {
    case WeightMode::Build:
      ctx.w = build_weights(ctx.e, sp.d_triple).first;
      break;
    case WeightMode::Diagonal:
      if (sp.w_diag.size() != k) {
        throw ConfigError("w_diag length does not match sensor count");
      }
      ctx.w = WeightMatrix::diagonal(sp.w_diag);
      break;
    case WeightMode::Explicit:
      if (sp.w_explicit.rows() != k) {
        throw ConfigError("w_matrix size does not match sensor count");
      }
      ctx.w = WeightMatrix::from_matrix(sp.w_explicit);
      break;
  }
  ctx.pot = std::make_shared<AttitudePotential>(ctx.e, ctx.w);
  const double bound = sp.direction_noise_bound();
  const Mat3 eff = bound > 0.0 ? Mat3(bound * sp.direction_noise.dj)
                               : Mat3(Mat3::Identity());
  ctx.iw = InnovationWeights::uniform(k, eff);
  return ctx;
}

struct FrameSet {
  std::vector<MeasurementFrame> frames;  // N+1
  std::vector<int> ctx_of_frame;         // index into contexts
  std::vector<SensorContext> contexts;
};

inline FrameSet make_frames(const Scenario& sc, const TruthSeries& truth) {
  const int n = sc.steps();
  FrameSet out;
  out.frames.reserve(n + 1);
  out.ctx_of_frame.reserve(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double t = i * sc.h;
    const std::vector<int> ids = active_ids_at(sc.sensors, t);
    int ctx_idx = -1;
    for (std::size_t c = 0; c < out.contexts.size(); ++c) {
      if (out.contexts[c].ids == ids) {
        ctx_idx = static_cast<int>(c);
        break;
      }
    }
    if (ctx_idx < 0) {
      out.contexts.push_back(make_context(sc.sensors, ids));
      ctx_idx = static_cast<int>(out.contexts.size()) - 1;
    }
    Mat3X raw(3, ids.size());
    for (std::size_t j = 0; j < ids.size(); ++j) {
      raw.col(j) = sc.sensors.e_cols.col(ids[j]);
    }
    MeasurementFrame f;
    f.t = t;
    f.active_sensor_ids = ids;
    f.um = BodyMeasurementSet::from_columns(measure_direction_columns(
        truth.r[i], raw, sc.sensors.direction_noise, t, sc.seed, i, &ids));
    f.omega_m =
        measure_gyro(truth.omega[i], sc.sensors.gyro_noise, t, sc.seed, i);
    out.frames.push_back(std::move(f));
    out.ctx_of_frame.push_back(ctx_idx);
  }
  if (sc.sensors.butterworth) {
    ButterworthState bw(out.frames[0].omega_m, sc.h);
    std::vector<Vec3> filtered(out.frames.size());
    filtered[0] = out.frames[0].omega_m;
    for (std::size_t i = 0; i + 1 < out.frames.size(); ++i) {
      filtered[i + 1] =
          bw.step(out.frames[i].omega_m, out.frames[i + 1].omega_m);
    }
    for (std::size_t i = 0; i < out.frames.size(); ++i) {
      out.frames[i].omega_m = filtered[i];
    }
  }
  return out;
}

// ------------------------------------------------------------------
// Attitude-filter runners. The timed loop only advances states; all
// metric evaluation happens afterwards.
// ------------------------------------------------------------------

struct AttitudeRow {
  Rotation rhat;
  Vec3 omega_hat = Vec3::Zero();
  Vec3 betahat = Vec3::Zero();
  RowStatus status = RowStatus::Ok;
};

struct TimedTrace {
  std::vector<AttitudeRow> rows;
  double wall_s = 0.0;
};

inline VarEstGains varest_gains(const ConfigSection& p, bool bias) {
  VarEstGains g;
  g.m_scalar = p.get_double("m_scalar", 1.0);
  g.d = p.get_vec3("d_diag", Vec3::Ones()).asDiagonal();
  g.phi = PhiFunction::identity();
  if (bias) {
    g.p_bias = Mat3(p.get_double("p_bias_scale", 1.0) * Mat3::Identity());
  }
  return g;
}

inline Vec3 matched_omega0(const FrameSet& fs, double p0) {
  const SensorContext& ctx = fs.contexts[fs.ctx_of_frame[0]];
  const Vec3 ell0 =
      innovation(Rotation::identity(), fs.frames[0].um, ctx.e, ctx.iw);
  return p0 * ell0;
}

inline Rotation initial_rhat(const ConfigSection& p) {
  if (p.has("rhat0_rotvec_rad")) {
    return exp_so3(p.get_vec3("rhat0_rotvec_rad"));
  }
  return Rotation::identity();
}

template <typename StepFn>
inline TimedTrace run_varest_loop(const FrameSet& fs, const VarEstState& s0,
                                  const StepFn& step) {
  const std::size_t n = fs.frames.size();
  TimedTrace out;
  out.rows.resize(n);
  VarEstState state = s0;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    out.rows[i] = AttitudeRow{
        state.rhat, Vec3(fs.frames[i].omega_m - state.omega - state.betahat),
        state.betahat, RowStatus::Ok};
    state = step(state, i);
  }
  out.rows[n - 1] = AttitudeRow{
      state.rhat, Vec3(fs.frames[n - 1].omega_m - state.omega - state.betahat),
      state.betahat, RowStatus::Ok};
  out.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             t0)
                   .count();
  return out;
}

inline TimedTrace run_varest(const FilterSpec& spec, const Scenario& sc,
                             const FrameSet& fs) {
  const bool bias = spec.kind == FilterKind::VarEstBias;
  const VarEstGains gains = varest_gains(spec.params, bias);
  NewtonConfig newton;
  newton.tol = spec.params.get_double("newton_tol", 1e-12);

  VarEstState s0;
  s0.rhat = initial_rhat(spec.params);
  s0.t = 0.0;
  if (spec.params.get_string("omega0_mode", "value") == "matched") {
    s0.omega = matched_omega0(fs, spec.params.get_double("p0_scalar"));
  } else {
    s0.omega = spec.params.get_vec3("omega0_rad_s", Vec3::Zero());
  }
  if (bias) {
    s0.betahat = spec.params.get_vec3("betahat0_rad_s", Vec3::Zero());
    if (spec.params.has("omegahat0_rad_s")) {
      // omega = Omega^m_0 - Omegahat_0 - betahat_0
      s0.omega = fs.frames[0].omega_m -
                 spec.params.get_vec3("omegahat0_rad_s") - s0.betahat;
    }
  }

  auto pot = [&](std::size_t i) -> const AttitudePotential* {
    const SensorContext& ctx = fs.contexts[fs.ctx_of_frame[i]];
    return ctx.e.count() >= 2 ? ctx.pot.get() : nullptr;
  };
  switch (spec.kind) {
    case FilterKind::VarEstImplicit:
      return run_varest_loop(fs, s0, [&](const VarEstState& s, std::size_t i) {
        return step_implicit(s, fs.frames[i], fs.frames[i + 1], pot(i + 1),
                             gains, newton);
      });
    case FilterKind::VarEstExplicit: {
      ExplicitStepCache cache;
      return run_varest_loop(fs, s0, [&](const VarEstState& s, std::size_t i) {
        return step_explicit(s, fs.frames[i], fs.frames[i + 1], pot(i), gains,
                             &cache);
      });
    }
    case FilterKind::VarEstSymmetric:
      return run_varest_loop(fs, s0, [&](const VarEstState& s, std::size_t i) {
        return step_symmetric(s, fs.frames[i], fs.frames[i + 1], pot(i),
                              pot(i + 1), gains, newton);
      });
    case FilterKind::VarEstBias:
      return run_varest_loop(fs, s0, [&](const VarEstState& s, std::size_t i) {
        return step_bias_implicit(s, fs.frames[i], fs.frames[i + 1], pot(i),
                                  pot(i + 1), gains, newton);
      });
    default:
      throw Error("run_varest: not a variational filter");
  }
}

inline TimedTrace run_covariance_filter(const FilterSpec& spec,
                                        const Scenario& sc,
                                        const FrameSet& fs) {
  const double p0 =
      spec.params.get_double("p0_scalar", 9.0 / (std::numbers::pi *
                                                 std::numbers::pi));
  const Mat3 q_cov = [&]() -> Mat3 {
    if (spec.params.has("q_cov_scalar")) {
      return spec.params.get_double("q_cov_scalar") * Mat3::Identity();
    }
    const double b = sc.sensors.gyro_noise_bound();
    return b * b * Mat3::Identity();
  }();

  const std::size_t n = fs.frames.size();
  TimedTrace out;
  out.rows.resize(n);
  CovFilterState state;
  state.rhat = initial_rhat(spec.params);
  state.p = p0 * Mat3::Identity();
  bool singular = false;

  GameConfig gcfg;
  gcfg.q_cov = q_cov;
  MekfConfig mcfg;
  mcfg.q_cov = q_cov;
  const bool is_game = spec.kind == FilterKind::Game;

  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Vec3 ell = singular
                         ? Vec3::Zero()
                         : innovation(state.rhat, fs.frames[i].um,
                                      fs.contexts[fs.ctx_of_frame[i]].e,
                                      fs.contexts[fs.ctx_of_frame[i]].iw);
    out.rows[i] = AttitudeRow{state.rhat,
                              Vec3(fs.frames[i].omega_m - state.p * ell),
                              Vec3::Zero(),
                              singular ? RowStatus::Singular : RowStatus::Ok};
    if (singular) continue;
    try {
      const SensorContext& ctx = fs.contexts[fs.ctx_of_frame[i]];
      state = is_game ? game_step(state, fs.frames[i], ctx.e, ctx.iw, gcfg,
                                  sc.h)
                      : mekf_step(state, fs.frames[i], ctx.e, ctx.iw, mcfg,
                                  sc.h);
    } catch (const CovarianceBlowup&) {
      singular = true;
    }
  }
  out.rows[n - 1] =
      AttitudeRow{state.rhat, fs.frames[n - 1].omega_m, Vec3::Zero(),
                  singular ? RowStatus::Singular : RowStatus::Ok};
  out.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             t0)
                   .count();
  return out;
}

inline TimedTrace run_cgo(const FilterSpec& spec, const Scenario& sc,
                          const FrameSet& fs) {
  CgoConfig cfg;
  cfg.k_p = spec.params.get_double("kp_scalar",
                                   9.0 / (std::numbers::pi * std::numbers::pi)) *
            Mat3::Identity();
  const std::size_t n = fs.frames.size();
  TimedTrace out;
  out.rows.resize(n);
  CgoState state;
  state.rhat = initial_rhat(spec.params);
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const SensorContext& ctx = fs.contexts[fs.ctx_of_frame[i]];
    const Vec3 ellbar =
        innovation_unweighted(state.rhat, fs.frames[i].um, ctx.e);
    out.rows[i] = AttitudeRow{state.rhat,
                              Vec3(fs.frames[i].omega_m - cfg.k_p * ellbar),
                              Vec3::Zero(), RowStatus::Ok};
    state = cgo_step(state, fs.frames[i], ctx.e, cfg, sc.h);
  }
  out.rows[n - 1] = AttitudeRow{state.rhat, fs.frames[n - 1].omega_m,
                                Vec3::Zero(), RowStatus::Ok};
  out.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             t0)
                   .count();
  return out;
}

// ------------------------------------------------------------------
// SE(3) observer runners
// ------------------------------------------------------------------

struct ObserverRow {
  Pose ghat;
  Twist xihat;
  double muhat = 0.0;
  RowStatus status = RowStatus::Ok;
};

struct ObserverTrace {
  std::vector<ObserverRow> rows;
  // set by co-propagating runners; metrics then reference these states
  std::vector<TruthState> plant;
  double wall_s = 0.0;
};

/// Sinusoidal full-state measurement corruption (attitude, position,
/// angular and linear velocity channels).
struct StateNoise {
  bool enabled = false;
  double att_amp_rad = 0.0;
  double pos_amp = 0.0;
  double gyro_amp = 0.0;
  double vel_amp = 0.0;
  double freq_hz = 0.0;

  FullStateMeasurement apply(const TruthState& s, std::uint64_t seed) const {
    FullStateMeasurement m;
    m.t = s.t;
    if (!enabled) {
      m.g = s.g;
      m.xi = s.xi;
      return m;
    }
    auto sines = [&](std::uint64_t channel, double amp) -> Vec3 {
      Vec3 out;
      for (int c = 0; c < 3; ++c) {
        CounterRng rng(seed, kGyroStream + 16 + channel * 4 + c, kPhaseStep);
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        out[c] =
            amp * std::sin(2.0 * std::numbers::pi * freq_hz * s.t + phase);
      }
      return out;
    };
    m.g = Pose(s.g.r * exp_so3(sines(0, att_amp_rad)),
               s.g.b + sines(1, pos_amp));
    m.xi = Twist(s.xi.omega + sines(2, gyro_amp), s.xi.v + sines(3, vel_amp));
    return m;
  }
};

inline StateNoise parse_state_noise(const Scenario& sc) {
  StateNoise n;
  n.enabled = sc.sensors.state_noise;
  n.att_amp_rad = sc.sensors.state_att_amp_rad;
  n.pos_amp = sc.sensors.state_pos_amp;
  n.gyro_amp = sc.sensors.state_gyro_amp;
  n.vel_amp = sc.sensors.state_vel_amp;
  n.freq_hz = sc.sensors.state_freq_hz;
  return n;
}

/// Full-state measurements on the half-step grid (2N+1 entries).
inline std::vector<FullStateMeasurement> make_state_measurements(
    const Scenario& sc, const TruthSeries& truth, const StateNoise& noise) {
  if (!truth.has_se3) {
    throw ConfigError("observer filters need a rigid_body truth");
  }
  std::vector<FullStateMeasurement> out;
  out.reserve(truth.se3_half.size());
  for (const TruthState& s : truth.se3_half) {
    out.push_back(noise.apply(s, sc.seed));
  }
  return out;
}

}  // namespace harness_detail

RunResult run_scenario(const Scenario& sc);
BenchmarkReport compare_filters(const Scenario& sc, int repeats);

}  // namespace geoest

#include "geoest/harness_impl.hpp"
