// geoest - declarative experiment description: nested key-value config
// files with unit-suffixed keys, parsed into typed scenario structs.
#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "geoest/core.hpp"
#include "geoest/dynamics.hpp"
#include "geoest/measurement.hpp"

namespace geoest {

/// One `[section]` of a config file.
class ConfigSection {
 public:
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
      throw ConfigError("missing config key '" + key + "'");
    }
    return it->second;
  }

  std::string get_string(const std::string& key, const std::string& dflt) const {
    return has(key) ? values_.at(key) : dflt;
  }

  double get_double(const std::string& key) const {
    return parse_double(key, get_string(key));
  }

  double get_double(const std::string& key, double dflt) const {
    return has(key) ? get_double(key) : dflt;
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t dflt) const {
    if (!has(key)) return dflt;
    try {
      return std::stoull(get_string(key));
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' is not an integer");
    }
  }

  bool get_bool(const std::string& key, bool dflt) const {
    if (!has(key)) return dflt;
    const std::string v = get_string(key);
    if (v == "true" || v == "on" || v == "1") return true;
    if (v == "false" || v == "off" || v == "0") return false;
    throw ConfigError("config key '" + key + "' is not a boolean");
  }

  std::vector<double> get_list(const std::string& key) const {
    std::istringstream in(get_string(key));
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(parse_double(key, tok));
    if (out.empty()) throw ConfigError("config key '" + key + "' is empty");
    return out;
  }

  Vec3 get_vec3(const std::string& key) const {
    const auto v = get_list(key);
    if (v.size() != 3) {
      throw ConfigError("config key '" + key + "' needs 3 values");
    }
    return Vec3(v[0], v[1], v[2]);
  }

  Vec3 get_vec3(const std::string& key, const Vec3& dflt) const {
    return has(key) ? get_vec3(key) : dflt;
  }

  void set(const std::string& key, const std::string& value) {
    values_[key] = value;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  static double parse_double(const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      const double x = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' is not a number: " + v);
    }
  }

  std::map<std::string, std::string> values_;
};

/// `key = value` lines grouped under `[section]` headers; `#` comments.
class Config {
 public:
  static Config parse_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') {
          throw ConfigError("line " + std::to_string(lineno) +
                            ": unterminated section header");
        }
        section = trim(line.substr(1, line.size() - 2));
        (void)cfg.sections_[section];
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("line " + std::to_string(lineno) +
                          ": expected 'key = value'");
      }
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) {
        throw ConfigError("line " + std::to_string(lineno) + ": empty key");
      }
      cfg.sections_[section].set(key, value);
    }
    return cfg;
  }

  static Config parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str());
  }

  bool has_section(const std::string& name) const {
    return sections_.count(name) > 0;
  }

  const ConfigSection& section(const std::string& name) const {
    auto it = sections_.find(name);
    if (it == sections_.end()) {
      throw ConfigError("missing config section [" + name + "]");
    }
    return it->second;
  }

  ConfigSection& section_or_create(const std::string& name) {
    return sections_[name];
  }

  const std::map<std::string, ConfigSection>& sections() const {
    return sections_;
  }

  /// Overlays every key of `other` on top of this config.
  void merge(const Config& other) {
    for (const auto& [name, sec] : other.sections_) {
      for (const auto& [k, v] : sec.values()) {
        sections_[name].set(k, v);
      }
    }
  }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
  }

  std::map<std::string, ConfigSection> sections_;
};

// ---------------------------------------------------------------------------
// Typed scenario
// ---------------------------------------------------------------------------

enum class TruthKind { PrescribedOmega, RigidBody };

enum class R0Mode { Identity, RotationVector, RandomStd };

struct TruthSpec {
  TruthKind kind = TruthKind::PrescribedOmega;
  R0Mode r0_mode = R0Mode::Identity;
  double r0_std_deg = 0.0;
  Vec3 r0_rotvec = Vec3::Zero();

  RigidBodyParams params;
  Vec3 b0 = Vec3::Zero();
  Vec3 omega0 = Vec3::Zero();
  Vec3 v0 = Vec3::Zero();

  std::optional<SphericalGravity> gravity;
  Vec6 wrench_const = Vec6::Zero();
  Vec6 wrench_sin_amp = Vec6::Zero();
  double wrench_sin_rate = 0.0;   // rad/s
  double wrench_sin_phase = 0.0;  // rad
  double uniform_gravity_mps2 = 0.0;

  // unmodeled disturbance: applied to the truth, unknown to observers
  Vec6 dist_sin_amp = Vec6::Zero();
  double dist_sin_rate = 0.0;
  double dist_sin_phase = 0.0;

  /// The wrench model known to observers.
  ForceModel nominal_force_model() const {
    ForceModel f;
    f.gravity = gravity;
    if ((wrench_const.array() != 0.0).any() ||
        (wrench_sin_amp.array() != 0.0).any()) {
      const Vec6 c = wrench_const;
      const Vec6 a = wrench_sin_amp;
      const double w = wrench_sin_rate;
      const double ph = wrench_sin_phase;
      f.prescribed = [c, a, w, ph](double t) -> Vec6 {
        return c + a * std::sin(w * t + ph);
      };
    }
    f.uniform_gravity_mps2 = uniform_gravity_mps2;
    return f;
  }

  /// The wrench driving the truth (nominal plus disturbance).
  ForceModel force_model() const {
    ForceModel f = nominal_force_model();
    if ((dist_sin_amp.array() != 0.0).any()) {
      auto nominal = f.prescribed;
      const Vec6 a = dist_sin_amp;
      const double w = dist_sin_rate;
      const double ph = dist_sin_phase;
      f.prescribed = [nominal, a, w, ph](double t) -> Vec6 {
        Vec6 out = a * std::sin(w * t + ph);
        if (nominal) out += nominal(t);
        return out;
      };
    }
    return f;
  }
};

enum class WeightMode { Build, Diagonal, Explicit };

struct ActiveWindow {
  double t_begin = 0.0;
  double t_end = 0.0;
  std::vector<int> ids;
};

struct SensorSpec {
  Mat3X e_cols;  // raw columns before any k=2 augmentation
  DirectionNoiseModel direction_noise;
  GyroNoiseModel gyro_noise;
  WeightMode w_mode = WeightMode::Build;
  Vec3 d_triple = Vec3(3.0, 2.0, 1.0);
  Eigen::VectorXd w_diag;
  MatX w_explicit;
  std::vector<ActiveWindow> schedule;  // empty = all sensors always
  bool butterworth = false;

  // sinusoidal corruption of full-state measurements (observer scenarios)
  bool state_noise = false;
  double state_att_amp_rad = 0.0;
  double state_pos_amp = 0.0;
  double state_gyro_amp = 0.0;
  double state_vel_amp = 0.0;
  double state_freq_hz = 0.0;

  /// Bound of the direction noise D_j nu seen by a filter (per axis).
  double direction_noise_bound() const {
    double amp = 0.0;
    if (direction_noise.kind == NoiseKind::BumpBounded) {
      amp = direction_noise.half_width_rad;
    } else if (direction_noise.kind == NoiseKind::SinusoidSum) {
      for (double a : direction_noise.amps) amp += a;
    }
    return amp;
  }

  double gyro_noise_bound() const {
    double amp = 0.0;
    if (gyro_noise.kind == NoiseKind::BumpBounded) {
      amp = gyro_noise.half_width_rad_s;
    } else if (gyro_noise.kind == NoiseKind::SinusoidSum) {
      for (double a : gyro_noise.amps) amp += a;
    }
    return amp;
  }
};

enum class FilterKind {
  VarEstImplicit,
  VarEstExplicit,
  VarEstSymmetric,
  VarEstBias,
  Game,
  Mekf,
  Cgo,
  GravityObserver,
  ForceObserver,
  FiniteTime,
};

inline FilterKind filter_kind_from_name(const std::string& name) {
  if (name == "varest_implicit") return FilterKind::VarEstImplicit;
  if (name == "varest_explicit") return FilterKind::VarEstExplicit;
  if (name == "varest_symmetric") return FilterKind::VarEstSymmetric;
  if (name == "varest_bias") return FilterKind::VarEstBias;
  if (name == "game") return FilterKind::Game;
  if (name == "mekf") return FilterKind::Mekf;
  if (name == "cgo") return FilterKind::Cgo;
  if (name == "gravity_observer") return FilterKind::GravityObserver;
  if (name == "force_observer") return FilterKind::ForceObserver;
  if (name == "finite_time") return FilterKind::FiniteTime;
  throw ConfigError("unknown filter kind: " + name);
}

struct FilterSpec {
  std::string name;
  FilterKind kind;
  ConfigSection params;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  double h = 0.01;
  double duration = 1.0;
  std::string out_dir = ".";
  TruthSpec truth;
  SensorSpec sensors;
  std::vector<FilterSpec> filters;

  int steps() const { return static_cast<int>(std::llround(duration / h)); }

  static Scenario from_config(const Config& cfg);
  static Scenario load(const std::string& path) {
    return from_config(Config::parse_file(path));
  }
};

namespace detail {

inline Mat3X parse_directions(const ConfigSection& s) {
  const std::string mode = s.get_string("e", "identity3");
  if (mode == "identity3") {
    return Mat3X(Mat3::Identity());
  }
  if (mode == "columns") {
    const auto v = s.get_list("e_columns");
    if (v.size() % 3 != 0 || v.size() < 6) {
      throw ConfigError("e_columns must hold 3 values per direction");
    }
    Mat3X e(3, v.size() / 3);
    for (std::size_t j = 0; j < v.size() / 3; ++j) {
      e.col(j) = Vec3(v[3 * j], v[3 * j + 1], v[3 * j + 2]);
    }
    return e;
  }
  throw ConfigError("sensors.e must be 'identity3' or 'columns'");
}

inline void parse_truth(const Config& cfg, TruthSpec& t) {
  if (!cfg.has_section("truth")) return;
  const ConfigSection& s = cfg.section("truth");
  const std::string kind = s.get_string("kind", "prescribed_omega");
  if (kind == "prescribed_omega") {
    t.kind = TruthKind::PrescribedOmega;
  } else if (kind == "rigid_body") {
    t.kind = TruthKind::RigidBody;
  } else {
    throw ConfigError("truth.kind must be prescribed_omega or rigid_body");
  }
  const std::string r0 = s.get_string("r0_mode", "identity");
  if (r0 == "identity") {
    t.r0_mode = R0Mode::Identity;
  } else if (r0 == "rotation_vector") {
    t.r0_mode = R0Mode::RotationVector;
    t.r0_rotvec = s.get_vec3("r0_rotvec_rad");
  } else if (r0 == "random_std") {
    t.r0_mode = R0Mode::RandomStd;
    t.r0_std_deg = s.get_double("r0_std_deg");
  } else {
    throw ConfigError("truth.r0_mode must be identity|rotation_vector|random_std");
  }
  t.params.mass = s.get_double("mass_kg", 1.0);
  if (s.has("j_diag_kgm2")) {
    t.params.j = s.get_vec3("j_diag_kgm2").asDiagonal();
  }
  if (s.has("j_scale")) t.params.j *= s.get_double("j_scale");
  t.b0 = s.get_vec3("b0_m", Vec3::Zero());
  t.omega0 = s.get_vec3("omega0_rad_s", Vec3::Zero());
  t.v0 = s.get_vec3("v0_m_s", Vec3::Zero());
  if (s.has("gravity_mu")) {
    SphericalGravity g;
    g.mu = s.get_double("gravity_mu");
    g.min_radius = s.get_double("gravity_min_radius", 1.0);
    g.inertia_force_terms = s.get_bool("gravity_inertia_force_terms", true);
    t.gravity = g;
  }
  if (s.has("wrench_const_nm_n")) {
    const auto v = s.get_list("wrench_const_nm_n");
    if (v.size() != 6) throw ConfigError("wrench_const_nm_n needs 6 values");
    for (int i = 0; i < 6; ++i) t.wrench_const[i] = v[i];
  }
  if (s.has("wrench_sin_amp_nm_n")) {
    const auto v = s.get_list("wrench_sin_amp_nm_n");
    if (v.size() != 6) throw ConfigError("wrench_sin_amp_nm_n needs 6 values");
    for (int i = 0; i < 6; ++i) t.wrench_sin_amp[i] = v[i];
    t.wrench_sin_rate = s.get_double("wrench_sin_rate_rad_s", 0.0);
    t.wrench_sin_phase = s.get_double("wrench_sin_phase_rad", 0.0);
  }
  t.uniform_gravity_mps2 = s.get_double("uniform_gravity_mps2", 0.0);
  if (s.has("dist_sin_amp_nm_n")) {
    const auto v = s.get_list("dist_sin_amp_nm_n");
    if (v.size() != 6) throw ConfigError("dist_sin_amp_nm_n needs 6 values");
    for (int i = 0; i < 6; ++i) t.dist_sin_amp[i] = v[i];
    t.dist_sin_rate = s.get_double("dist_sin_rate_rad_s", 0.0);
    t.dist_sin_phase = s.get_double("dist_sin_phase_rad", 0.0);
  }
}

inline void parse_sensors(const Config& cfg, SensorSpec& sp) {
  if (!cfg.has_section("sensors")) {
    sp.e_cols = Mat3X(Mat3::Identity());
    return;
  }
  const ConfigSection& s = cfg.section("sensors");
  sp.e_cols = parse_directions(s);
  const std::string noise = s.get_string("noise_kind", "none");
  if (noise == "none") {
    sp.direction_noise = DirectionNoiseModel::none();
    sp.gyro_noise = GyroNoiseModel::none();
  } else if (noise == "bump") {
    sp.direction_noise =
        DirectionNoiseModel::bump(s.get_double("direction_bound_rad"));
    sp.gyro_noise = GyroNoiseModel::bump(s.get_double("gyro_bound_rad_s"));
  } else if (noise == "sinusoid") {
    auto to_vec = [&](const std::string& key) { return s.get_list(key); };
    sp.direction_noise = DirectionNoiseModel::sinusoids(
        to_vec("direction_freqs_hz"), to_vec("direction_amps_rad"));
    sp.gyro_noise = GyroNoiseModel::sinusoids(to_vec("gyro_freqs_hz"),
                                              to_vec("gyro_amps_rad_s"));
  } else {
    throw ConfigError("sensors.noise_kind must be none|bump|sinusoid");
  }
  sp.gyro_noise.bias = s.get_vec3("gyro_bias_rad_s", Vec3::Zero());

  const std::string wmode = s.get_string("w_mode", "build");
  if (wmode == "build") {
    sp.w_mode = WeightMode::Build;
    sp.d_triple = s.get_vec3("w_d_triple", Vec3(3.0, 2.0, 1.0));
  } else if (wmode == "diag") {
    sp.w_mode = WeightMode::Diagonal;
    const auto v = s.get_list("w_diag");
    sp.w_diag = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
  } else if (wmode == "explicit") {
    sp.w_mode = WeightMode::Explicit;
    const auto v = s.get_list("w_matrix");
    const int n = static_cast<int>(std::llround(std::sqrt(double(v.size()))));
    if (n * n != static_cast<int>(v.size())) {
      throw ConfigError("w_matrix must be a flattened square matrix");
    }
    sp.w_explicit = Eigen::Map<const MatX>(v.data(), n, n).transpose();
  } else {
    throw ConfigError("sensors.w_mode must be build|diag|explicit");
  }
  sp.butterworth = s.get_bool("butterworth", false);

  sp.state_noise = s.get_bool("state_noise", false);
  if (sp.state_noise) {
    sp.state_att_amp_rad = s.get_double("state_att_amp_rad", 0.0);
    sp.state_pos_amp = s.get_double("state_pos_amp_m", 0.0);
    sp.state_gyro_amp = s.get_double("state_gyro_amp_rad_s", 0.0);
    sp.state_vel_amp = s.get_double("state_vel_amp_m_s", 0.0);
    sp.state_freq_hz = s.get_double("state_freq_hz", 100.0);
  }

  // schedule = t0 t1 id id ... ; t0 t1 id ...
  if (s.has("schedule")) {
    std::istringstream in(s.get_string("schedule"));
    std::string part;
    while (std::getline(in, part, ';')) {
      std::istringstream pin(part);
      ActiveWindow w;
      if (!(pin >> w.t_begin >> w.t_end)) {
        throw ConfigError("schedule window needs 't0 t1 id...'");
      }
      int id;
      while (pin >> id) w.ids.push_back(id);
      if (w.ids.empty()) throw ConfigError("schedule window has no sensors");
      sp.schedule.push_back(std::move(w));
    }
  }
}

}  // namespace detail

inline Scenario Scenario::from_config(const Config& cfg) {
  Scenario sc;
  const ConfigSection& g = cfg.section("");
  sc.name = g.get_string("name", "scenario");
  sc.seed = g.get_u64("seed", 0);
  sc.h = g.get_double("h_s");
  sc.duration = g.get_double("duration_s");
  sc.out_dir = g.get_string("out_dir", ".");
  if (sc.h <= 0.0) throw ConfigError("h_s must be positive");
  if (sc.duration < sc.h) throw ConfigError("duration_s must be at least h_s");
  detail::parse_truth(cfg, sc.truth);
  detail::parse_sensors(cfg, sc.sensors);
  for (const auto& [name, sec] : cfg.sections()) {
    constexpr const char* prefix = "filters.";
    if (name.rfind(prefix, 0) == 0) {
      FilterSpec f;
      f.name = name.substr(std::string(prefix).size());
      f.kind = filter_kind_from_name(f.name);
      f.params = sec;
      sc.filters.push_back(std::move(f));
    }
  }
  if (sc.filters.empty()) {
    throw ConfigError("scenario configures no filters");
  }
  return sc;
}

}  // namespace geoest
