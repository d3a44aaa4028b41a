// geoest - CSV/SVG export, trajectory files, and IMU log replay.
#pragma once

#include <array>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "geoest/harness.hpp"

namespace geoest {

namespace io_detail {

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline const char* flag_name(RowStatus s) {
  switch (s) {
    case RowStatus::Ok:
      return "ok";
    case RowStatus::Singular:
      return "singular";
    case RowStatus::Failed:
      return "failed";
  }
  return "ok";
}

inline RowStatus flag_from_name(const std::string& s) {
  if (s == "ok") return RowStatus::Ok;
  if (s == "singular") return RowStatus::Singular;
  if (s == "failed") return RowStatus::Failed;
  throw ParseError("unknown flag value: " + s);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace io_detail

inline constexpr const char* kResultCsvHeader =
    "t,filter,phi_rad,omega_err_norm,beta_err_x,beta_err_y,beta_err_z,"
    "mu_err,flag";

/// Writes one row per (filter, timestep); wall-clock stays out of the
/// file so equal seeds give byte-identical output.
inline void export_csv(const RunResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << kResultCsvHeader << "\n";
  for (const FilterSeries& s : result.filters) {
    for (std::size_t i = 0; i < s.t.size(); ++i) {
      out << io_detail::fmt(s.t[i]) << ',' << s.name << ','
          << io_detail::fmt(s.phi[i]) << ','
          << io_detail::fmt(s.omega_err_norm[i]) << ','
          << io_detail::fmt(s.beta_err[i].x()) << ','
          << io_detail::fmt(s.beta_err[i].y()) << ','
          << io_detail::fmt(s.beta_err[i].z()) << ','
          << io_detail::fmt(s.mu_err[i]) << ','
          << io_detail::flag_name(s.status[i]) << "\n";
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

/// Parses a file written by export_csv (the in-memory eta/xi series are
/// not persisted and come back empty-initialized to zero).
inline RunResult read_result_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line) ||
      io_detail::split_csv_line(line) !=
          io_detail::split_csv_line(kResultCsvHeader)) {
    throw ParseError("bad result CSV header in " + path);
  }
  RunResult out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = io_detail::split_csv_line(line);
    if (f.size() != 9) throw ParseError("bad result CSV row: " + line);
    FilterSeries* s = nullptr;
    for (FilterSeries& existing : out.filters) {
      if (existing.name == f[1]) s = &existing;
    }
    if (s == nullptr) {
      out.filters.emplace_back();
      s = &out.filters.back();
      s->name = f[1];
    }
    s->t.push_back(std::stod(f[0]));
    s->phi.push_back(std::stod(f[2]));
    s->omega_err_norm.push_back(std::stod(f[3]));
    s->beta_err.push_back(Vec3(std::stod(f[4]), std::stod(f[5]),
                               std::stod(f[6])));
    s->eta_err.push_back(Vec6::Zero());
    s->xi_err.push_back(Vec6::Zero());
    s->mu_err.push_back(std::stod(f[7]));
    s->status.push_back(io_detail::flag_from_name(f[8]));
  }
  return out;
}

inline void export_benchmark_csv(const BenchmarkReport& report,
                                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "scenario,filter,rank,total_s,per_step_mean_s,per_step_p95_s\n";
  for (std::size_t i = 0; i < report.entries.size(); ++i) {
    const BenchmarkEntry& e = report.entries[i];
    out << report.scenario_name << ',' << e.name << ',' << i + 1 << ','
        << io_detail::fmt(e.total_s) << ','
        << io_detail::fmt(e.per_step_mean_s) << ','
        << io_detail::fmt(e.per_step_p95_s) << "\n";
  }
}

// ---------------------------------------------------------------------------
// Trajectory CSV (t, rotation entries row-major, position, body rates)
// ---------------------------------------------------------------------------

inline constexpr const char* kTrajectoryCsvHeader =
    "t,r11,r12,r13,r21,r22,r23,r31,r32,r33,bx,by,bz,wx,wy,wz,vx,vy,vz";

inline void export_trajectory_csv(const std::vector<TruthState>& traj,
                                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << kTrajectoryCsvHeader << "\n";
  for (const TruthState& s : traj) {
    out << io_detail::fmt(s.t);
    const Mat3& r = s.g.r.matrix();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) out << ',' << io_detail::fmt(r(i, j));
    }
    for (int i = 0; i < 3; ++i) out << ',' << io_detail::fmt(s.g.b[i]);
    for (int i = 0; i < 3; ++i) out << ',' << io_detail::fmt(s.xi.omega[i]);
    for (int i = 0; i < 3; ++i) out << ',' << io_detail::fmt(s.xi.v[i]);
    out << "\n";
  }
}

inline std::vector<TruthState> read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line) ||
      io_detail::split_csv_line(line) !=
          io_detail::split_csv_line(kTrajectoryCsvHeader)) {
    throw ParseError("bad trajectory CSV header in " + path);
  }
  std::vector<TruthState> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = io_detail::split_csv_line(line);
    if (f.size() != 19) throw ParseError("bad trajectory CSV row");
    TruthState s;
    s.t = std::stod(f[0]);
    Mat3 r;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) r(i, j) = std::stod(f[1 + 3 * i + j]);
    }
    s.g.r = Rotation::from_matrix_unchecked(r).renormalized();
    s.g.b = Vec3(std::stod(f[10]), std::stod(f[11]), std::stod(f[12]));
    s.xi.omega = Vec3(std::stod(f[13]), std::stod(f[14]), std::stod(f[15]));
    s.xi.v = Vec3(std::stod(f[16]), std::stod(f[17]), std::stod(f[18]));
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// SVG rendering (dependency-free line chart of phi(t) per filter)
// ---------------------------------------------------------------------------

inline void render_svg(const RunResult& result, const std::string& path) {
  constexpr int w = 900;
  constexpr int hgt = 460;
  constexpr int ml = 70, mr = 160, mt = 30, mb = 50;
  static const std::array<const char*, 8> palette = {
      "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
      "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

  double tmax = 1e-12;
  double ymax = 1e-12;
  for (const FilterSeries& s : result.filters) {
    for (std::size_t i = 0; i < s.t.size(); ++i) {
      if (std::isfinite(s.phi[i])) {
        tmax = std::max(tmax, s.t[i]);
        ymax = std::max(ymax, s.phi[i] * 180.0 / std::numbers::pi);
      }
    }
  }
  auto px = [&](double t) { return ml + t / tmax * (w - ml - mr); };
  auto py = [&](double deg) { return hgt - mb - deg / ymax * (hgt - mt - mb); };

  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << hgt << "\" viewBox=\"0 0 " << w << " " << hgt
      << "\">\n";
  out << "<rect width=\"" << w << "\" height=\"" << hgt
      << "\" fill=\"white\"/>\n";
  // axes
  out << "<g stroke=\"black\" stroke-width=\"1\">\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << hgt - mb << "\" x2=\"" << w - mr
      << "\" y2=\"" << hgt - mb << "\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << hgt - mb << "\"/>\n";
  out << "</g>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"black\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double t = tmax * i / 5.0;
    const double deg = ymax * i / 5.0;
    out << "<text x=\"" << px(t) - 8 << "\" y=\"" << hgt - mb + 18 << "\">"
        << io_detail::fmt(std::round(t * 100.0) / 100.0) << "</text>\n";
    out << "<text x=\"" << 8 << "\" y=\"" << py(deg) + 4 << "\">"
        << io_detail::fmt(std::round(deg * 100.0) / 100.0) << "</text>\n";
  }
  out << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << hgt - 12
      << "\">t (s)</text>\n";
  out << "<text x=\"8\" y=\"" << mt - 10 << "\">phi (deg)</text>\n";
  out << "</g>\n";
  int idx = 0;
  for (const FilterSeries& s : result.filters) {
    const char* color = palette[idx % palette.size()];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.t.size(); ++i) {
      if (!std::isfinite(s.phi[i])) continue;
      out << px(s.t[i]) << ',' << py(s.phi[i] * 180.0 / std::numbers::pi)
          << ' ';
    }
    out << "\"/>\n";
    out << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect x=\"" << w - mr + 10 << "\" y=\"" << mt + 20 * idx
        << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n";
    out << "<text x=\"" << w - mr + 28 << "\" y=\"" << mt + 20 * idx + 11
        << "\" fill=\"black\">" << s.name
        << (s.singular ? " (singular)" : "") << "</text>\n";
    out << "</g>\n";
    ++idx;
  }
  out << "</svg>\n";
  if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// IMU log replay
// ---------------------------------------------------------------------------

inline constexpr const char* kImuCsvHeader = "t,ax,ay,az,mx,my,mz,gx,gy,gz";

struct ImuSample {
  double t;
  Vec3 accel;
  Vec3 mag;
  Vec3 gyro;
};

/// Reads an IMU log. Empty cells reuse the last read value of that
/// channel; the first row must be complete.
inline std::vector<ImuSample> read_imu_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty IMU log: " + path);
  if (io_detail::split_csv_line(line) !=
      io_detail::split_csv_line(kImuCsvHeader)) {
    throw ParseError("IMU log header must be '" + std::string(kImuCsvHeader) +
                     "'");
  }
  std::vector<ImuSample> out;
  std::array<double, 9> last{};
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = io_detail::split_csv_line(line);
    if (f.size() != 10) throw ParseError("IMU row needs 10 fields: " + line);
    ImuSample s;
    try {
      s.t = std::stod(f[0]);
      for (int c = 0; c < 9; ++c) {
        if (f[c + 1].empty()) {
          if (first) throw ParseError("first IMU row has empty fields");
          // hold the last read value of this channel
        } else {
          last[c] = std::stod(f[c + 1]);
        }
      }
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception&) {
      throw ParseError("bad IMU row: " + line);
    }
    s.accel = Vec3(last[0], last[1], last[2]);
    s.mag = Vec3(last[3], last[4], last[5]);
    s.gyro = Vec3(last[6], last[7], last[8]);
    if (!out.empty() && s.t <= out.back().t) {
      throw NonMonotoneTimestamps("IMU timestamps must increase");
    }
    out.push_back(s);
    first = false;
  }
  if (out.size() < 2) throw ParseError("IMU log needs at least 2 rows");
  return out;
}

/// Estimator defaults for log replay: the symmetric second-order filter
/// with Butterworth pre-filtered rates, Phi(x) = x, m = 0.5,
/// D = diag(12, 13, 14), and the smartphone-experiment E and W.
inline RunResult replay_imu(const std::string& path,
                            const Config* overrides = nullptr) {
  ConfigSection opt;
  if (overrides != nullptr && overrides->has_section("replay")) {
    opt = overrides->section("replay");
  }
  const std::vector<ImuSample> samples = read_imu_csv(path);

  Mat3 e_cols;
  e_cols << 0.0, 0.0772, -0.9921,  //
      0.0, 0.6117, 0.1251,         //
      1.0, -0.7873, 0.0;
  if (opt.has("e_columns")) {
    const auto v = opt.get_list("e_columns");
    if (v.size() != 9) throw ConfigError("replay e_columns needs 9 values");
    for (int j = 0; j < 3; ++j) {
      e_cols.col(j) = Vec3(v[3 * j], v[3 * j + 1], v[3 * j + 2]);
    }
  }
  for (int j = 0; j < 3; ++j) e_cols.col(j).normalize();
  const DirectionSet e = DirectionSet::from_columns(Mat3X(e_cols));

  MatX w_mat(3, 3);
  w_mat << 3.19, 1.51, 0.0,  //
      1.51, 3.19, 0.0,       //
      0.0, 0.0, 2.0;
  if (opt.has("w_matrix")) {
    const auto v = opt.get_list("w_matrix");
    if (v.size() != 9) throw ConfigError("replay w_matrix needs 9 values");
    w_mat = Eigen::Map<const MatX>(v.data(), 3, 3).transpose();
  }
  const WeightMatrix w = WeightMatrix::from_matrix(w_mat);
  const AttitudePotential pot(e, w);

  VarEstGains gains;
  gains.m_scalar = opt.get_double("m_scalar", 0.5);
  gains.d = opt.get_vec3("d_diag", Vec3(12.0, 13.0, 14.0)).asDiagonal();
  NewtonConfig newton;
  const bool butterworth = opt.get_bool("butterworth", true);
  const std::string method = opt.get_string("estimator", "varest_symmetric");

  // frames from the log: normalized accel = up, normalized mag = field,
  // cross of the measured pair appended
  std::vector<MeasurementFrame> frames;
  frames.reserve(samples.size());
  for (const ImuSample& s : samples) {
    Mat3X raw(3, 2);
    const double an = s.accel.norm();
    const double mn = s.mag.norm();
    if (an < 1e-12 || mn < 1e-12) {
      throw ParseError("IMU row has zero accel or mag vector");
    }
    raw.col(0) = s.accel / an;
    raw.col(1) = s.mag / mn;
    MeasurementFrame f;
    f.t = s.t;
    f.um = BodyMeasurementSet::from_columns(raw);
    f.omega_m = s.gyro;
    f.active_sensor_ids = {0, 1};
    frames.push_back(std::move(f));
  }
  if (butterworth) {
    ButterworthState bw(frames[0].omega_m, frames[1].t - frames[0].t);
    for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
      bw.h = frames[i + 1].t - frames[i].t;
      frames[i + 1].omega_m = bw.step(frames[i].omega_m, frames[i + 1].omega_m);
    }
    frames[0].omega_m = bw.xbar;  // unchanged initial value
  }

  // optional truth (trajectory CSV sampled on the same timestamps)
  std::vector<TruthState> truth;
  if (opt.has("truth_csv")) {
    truth = read_trajectory_csv(opt.get_string("truth_csv"));
    if (truth.size() != frames.size()) {
      throw ParseError("replay truth_csv length does not match the log");
    }
  }

  VarEstState state;
  state.rhat = opt.has("rhat0_rotvec_rad")
                   ? exp_so3(opt.get_vec3("rhat0_rotvec_rad"))
                   : Rotation::identity();
  state.omega = opt.get_vec3("omega0_rad_s", Vec3::Zero());
  state.t = frames[0].t;

  FilterSeries s;
  s.name = method;
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<VarEstState> states;
  states.reserve(frames.size());
  states.push_back(state);
  for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
    if (method == "varest_symmetric") {
      state = step_symmetric(state, frames[i], frames[i + 1], &pot, &pot,
                             gains, newton);
    } else if (method == "varest_implicit") {
      state = step_implicit(state, frames[i], frames[i + 1], &pot, gains,
                            newton);
    } else if (method == "varest_explicit") {
      state = step_explicit(state, frames[i], frames[i + 1], &pot, gains);
    } else {
      throw ConfigError("replay estimator must be a variational filter");
    }
    states.push_back(state);
  }
  s.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                           t0)
                 .count();
  s.steps_timed = static_cast<long>(frames.size()) - 1;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    s.t.push_back(frames[i].t);
    if (!truth.empty()) {
      s.phi.push_back(metric_principal_angle(truth[i].g.r, states[i].rhat));
      s.omega_err_norm.push_back(
          (truth[i].xi.omega -
           Vec3(frames[i].omega_m - states[i].omega))
              .norm());
    } else {
      s.phi.push_back(nan);
      s.omega_err_norm.push_back(nan);
    }
    s.beta_err.push_back(Vec3::Zero());
    s.eta_err.push_back(Vec6::Zero());
    s.xi_err.push_back(Vec6::Zero());
    s.mu_err.push_back(0.0);
    s.status.push_back(RowStatus::Ok);
  }
  if (!truth.empty()) harness_detail::finalize_flags(s, frames[1].t - frames[0].t);
  RunResult out;
  out.scenario_name = "replay";
  out.filters.push_back(std::move(s));
  return out;
}

}  // namespace geoest
