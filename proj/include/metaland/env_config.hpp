// Scenario descriptions: initial-condition ranges, body randomization, thrust
// and failure models, reward weights, shaping and terminal limits.
#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "metaland/core.hpp"

namespace metaland {

enum class ThrustMode { MagnitudeBand, Pulsed };
enum class ObservationMode { State, Altimeter, AltimeterTargetPointing };
enum class ShapingMode { Piecewise, SingleBranch };

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct Range3 {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
};

struct EnvConfig {
  std::string scenario = "mars";

  // initial conditions, target-centered frame
  Range3 position;
  Range3 velocity;

  // body parameters
  Vec3 g_nominal{0.0, 0.0, -3.7114};
  // Mars-style gravity: each component is nominal + U(-1,1) * spread * |g|.
  double g_spread = 0.05;
  // Asteroid-style gravity: componentwise uniform in g_range (used when
  // g_componentwise is true).
  bool g_componentwise = false;
  Range3 g_range;
  Range3 omega_range;
  Range3 srp_range;
  Vec3 r_offset = Vec3::Zero();
  double isp = 225.0;
  double g_ref = 9.8;
  Range wet_mass{1800.0, 2200.0};
  double dry_mass = 200.0;
  Vec3 f_env_sigma{100.0, 100.0, 100.0};

  // thrust model
  ThrustMode thrust_mode = ThrustMode::MagnitudeBand;
  double t_min = 2000.0;
  double t_max = 15000.0;

  // engine failure model
  double p_fail = 0.0;
  double lateral_failure_factor = 2.0;
  double vertical_failure_factor = 1.5;

  // reward weights
  double alpha = -0.01;
  double beta = -0.05;
  double gamma_const = 0.01;
  double eta = 10.0;
  double abort_penalty = -10.0;

  // shaping velocity field
  ShapingMode shaping = ShapingMode::Piecewise;
  bool capture_v_o = true;  // v_o = |v(0)| per episode
  double v_o = 1.0;         // used when capture_v_o is false
  double tau1 = 20.0;
  double tau2 = 100.0;
  double hover_altitude = 15.0;
  double vz_target_high = -2.0;
  double vz_target_low = -1.0;

  // terminal limits
  double r_lim = 5.0;
  double v_lim = 2.0;
  double gs_lim = 5.0;
  // |r| beyond which the episode aborts with abort_penalty; 0 disables.
  double range_limit = 6000.0;

  // discounts for the terminal (r1) and shaping (r2) reward channels
  double gamma1 = 0.995;
  double gamma2 = 0.95;

  // observation
  ObservationMode obs_mode = ObservationMode::State;
  Vec3 dtm_target{4000.0, 4000.0, 400.0};
  double altimeter_scale = 5000.0;

  double dt = 0.2;
  int max_steps = 600;

  void validate() const;
};

inline void EnvConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::ConfigError, what);
  };
  auto check_range3 = [&](const Range3& r, const char* name) {
    for (int i = 0; i < 3; ++i) {
      if (!(r.lo[i] <= r.hi[i])) {
        fail(std::string("inverted range: ") + name);
      }
    }
  };
  check_range3(position, "position");
  check_range3(velocity, "velocity");
  check_range3(g_range, "g_range");
  check_range3(omega_range, "omega_range");
  check_range3(srp_range, "srp_range");
  if (!(wet_mass.lo <= wet_mass.hi)) fail("inverted range: wet_mass");
  if (!(wet_mass.lo > dry_mass)) fail("wet mass must exceed dry mass");
  if (!(t_min <= t_max)) fail("t_min must not exceed t_max");
  if (!(t_max > 0.0)) fail("t_max must be positive");
  if (!(p_fail >= 0.0 && p_fail <= 1.0)) fail("p_fail must lie in [0, 1]");
  if (!(lateral_failure_factor >= 1.0 && vertical_failure_factor >= 1.0)) {
    fail("failure factors must be >= 1");
  }
  if (!(r_lim > 0.0 && v_lim > 0.0)) fail("r_lim and v_lim must be positive");
  if (!(range_limit >= 0.0)) fail("range_limit must be >= 0");
  if (!(gamma1 > 0.0 && gamma1 < 1.0 && gamma2 > 0.0 && gamma2 < 1.0)) {
    fail("discounts must lie in (0, 1)");
  }
  if (!(isp > 0.0 && g_ref > 0.0)) fail("isp and g_ref must be positive");
  if (!(f_env_sigma.minCoeff() >= 0.0)) fail("f_env_sigma must be >= 0");
  if (!(tau1 > 0.0 && tau2 > 0.0)) fail("tau values must be positive");
  if (!(dt > 0.0)) fail("dt must be positive");
  if (max_steps < 1) fail("max_steps must be >= 1");
  if (!(altimeter_scale > 0.0)) fail("altimeter_scale must be positive");
}

// Mars powered descent with the [2000, 15000] N magnitude band.
inline EnvConfig mars_nominal_config() {
  EnvConfig c;
  c.scenario = "mars";
  c.position = {Vec3(0.0, -1000.0, 2300.0), Vec3(2000.0, 1000.0, 2400.0)};
  c.velocity = {Vec3(-70.0, -30.0, -90.0), Vec3(-10.0, 30.0, -70.0)};
  return c;
}

inline EnvConfig mars_engine_failure_config() {
  EnvConfig c = mars_nominal_config();
  c.scenario = "mars-failure";
  c.t_max = 24000.0;
  c.p_fail = 0.5;
  return c;
}

inline EnvConfig mars_high_mass_config() {
  EnvConfig c = mars_nominal_config();
  c.scenario = "mars-highmass";
  c.isp = 225.0 / 6.0;
  return c;
}

// Altimeter-only observations, beams on the velocity-averaged axis.
inline EnvConfig mars_altimeter_config() {
  EnvConfig c = mars_nominal_config();
  c.scenario = "mars-altimeter";
  c.obs_mode = ObservationMode::Altimeter;
  return c;
}

// Beams held on the target, with the tighter initial-condition box.
inline EnvConfig mars_altimeter_pointing_config() {
  EnvConfig c = mars_nominal_config();
  c.scenario = "mars-altimeter-pointing";
  c.obs_mode = ObservationMode::AltimeterTargetPointing;
  c.position = {Vec3(0.0, -500.0, 1000.0), Vec3(1000.0, 500.0, 1000.0)};
  c.velocity = {Vec3(-30.0, -30.0, -50.0), Vec3(-10.0, 30.0, -40.0)};
  return c;
}

// Asteroid landing with randomized rotation, gravity and SRP, pulsed 2 N
// thrusters, and a target on the pole 250 m from the rotation center.
inline EnvConfig asteroid_config() {
  EnvConfig c;
  c.scenario = "asteroid";
  c.position = {Vec3(900.0, 900.0, 900.0), Vec3(1100.0, 1100.0, 1100.0)};
  c.velocity = {Vec3(-1.0, -1.0, -1.0), Vec3(-1.0, -1.0, -1.0)};
  c.g_componentwise = true;
  c.g_range = {Vec3::Constant(-100e-6), Vec3::Constant(-1e-6)};
  c.g_nominal = Vec3::Constant(-50.5e-6);
  c.omega_range = {Vec3::Constant(-1e-3), Vec3::Constant(1e-3)};
  c.srp_range = {Vec3::Constant(-1e-6), Vec3::Constant(1e-6)};
  c.r_offset = Vec3(0.0, 0.0, 250.0);
  c.wet_mass = {450.0, 500.0};
  c.dry_mass = 300.0;
  c.f_env_sigma = Vec3::Constant(0.02);
  c.thrust_mode = ThrustMode::Pulsed;
  c.t_min = 0.0;
  c.t_max = 2.0;
  c.alpha = -1.0;
  c.beta = -0.01;
  c.gamma_const = 0.01;
  c.eta = 10.0;
  c.shaping = ShapingMode::SingleBranch;
  c.capture_v_o = false;
  c.v_o = 1.0;
  c.tau1 = 300.0;
  c.tau2 = 300.0;
  c.r_lim = 1.0;
  c.v_lim = 0.2;
  c.gs_lim = 0.0;
  c.range_limit = 4000.0;
  c.dt = 6.0;
  c.max_steps = 500;
  return c;
}

// Small, short-horizon descent used for smoke training: a few hundred meters
// up, gentle velocities, no disturbance or body randomization.
inline EnvConfig toy_config() {
  EnvConfig c = mars_nominal_config();
  c.scenario = "toy";
  c.position = {Vec3(-100.0, -100.0, 300.0), Vec3(100.0, 100.0, 320.0)};
  c.velocity = {Vec3(-5.0, -5.0, -20.0), Vec3(5.0, 5.0, -15.0)};
  c.g_spread = 0.0;
  c.wet_mass = {2000.0, 2000.0};
  c.f_env_sigma = Vec3::Zero();
  c.max_steps = 300;
  return c;
}

inline std::vector<std::string> scenario_keys() {
  return {"mars",           "mars-failure",
          "mars-highmass",  "mars-altimeter",
          "mars-altimeter-pointing", "asteroid",
          "toy"};
}

inline EnvConfig scenario_config(std::string_view key) {
  if (key == "mars") return mars_nominal_config();
  if (key == "mars-failure") return mars_engine_failure_config();
  if (key == "mars-highmass") return mars_high_mass_config();
  if (key == "mars-altimeter") return mars_altimeter_config();
  if (key == "mars-altimeter-pointing") return mars_altimeter_pointing_config();
  if (key == "asteroid") return asteroid_config();
  if (key == "toy") return toy_config();
  throw Error(ErrorCode::ConfigError,
              "unknown scenario '" + std::string(key) + "'");
}

// Removes randomization: collapsed IC ranges at their midpoints, nominal
// gravity and mass, no disturbance, no failures.
inline EnvConfig deterministic(EnvConfig c) {
  c.g_spread = 0.0;
  if (c.g_componentwise) c.g_range = {c.g_nominal, c.g_nominal};
  c.omega_range = {Vec3::Zero(), Vec3::Zero()};
  c.srp_range = {Vec3::Zero(), Vec3::Zero()};
  const double mid_mass = 0.5 * (c.wet_mass.lo + c.wet_mass.hi);
  c.wet_mass = {mid_mass, mid_mass};
  c.f_env_sigma = Vec3::Zero();
  c.p_fail = 0.0;
  return c;
}

namespace detail {

inline Vec3 parse_vec3(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  Vec3 v;
  std::string token;
  for (int i = 0; i < 3; ++i) {
    if (!(in >> token)) {
      throw Error(ErrorCode::ParseError, "key '" + key + "' needs 3 values");
    }
    if (token.back() == ',') token.pop_back();
    try {
      v[i] = std::stod(token);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ParseError,
                  "key '" + key + "': bad number '" + token + "'");
    }
  }
  return v;
}

inline double parse_double(const std::string& text, const std::string& key) {
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (text.find_first_not_of(" \t", used) != std::string::npos) {
      throw std::invalid_argument(text);
    }
    return value;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError,
                "key '" + key + "': bad number '" + text + "'");
  }
}

inline bool parse_bool(const std::string& text, const std::string& key) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw Error(ErrorCode::ParseError, "key '" + key + "': bad boolean");
}

}  // namespace detail

// Applies overrides from an INI-style tree. Sections group keys:
//   [scenario] base = <scenario key>
//   [initial]  position_min, position_max, velocity_min, velocity_max
//   [body]     g, g_spread, g_min, g_max, omega_min, omega_max, srp_min,
//              srp_max, r_offset, isp, g_ref, wet_mass_min, wet_mass_max,
//              dry_mass, f_env_sigma
//   [thrust]   mode (band|pulsed), t_min, t_max
//   [failure]  p_fail, lateral_factor, vertical_factor
//   [reward]   alpha, beta, gamma, eta, abort_penalty
//   [shaping]  v_o, capture_v_o, tau1, tau2, hover_altitude,
//              vz_target_high, vz_target_low, mode (piecewise|single)
//   [terminal] r_lim, v_lim, gs_lim, range_limit
//   [discount] gamma1, gamma2
//   [observation] mode (state|altimeter|altimeter-pointing), dtm_target,
//              altimeter_scale
//   [episode]  dt, max_steps
// Unknown keys are rejected so typos surface as ConfigError.
inline void apply_overrides(EnvConfig& c,
                            const boost::property_tree::ptree& tree) {
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_vec3;
  for (const auto& [section, body] : tree) {
    if (section == "scenario" || section == "run" || section == "drdv" ||
        section == "ppo" || section == "terrain") {
      continue;
    }
    for (const auto& [key, node] : body) {
      const std::string full = section + "." + key;
      const std::string value = node.get_value<std::string>();
      auto num = [&] { return parse_double(value, full); };
      auto vec = [&] { return parse_vec3(value, full); };
      if (full == "initial.position_min") c.position.lo = vec();
      else if (full == "initial.position_max") c.position.hi = vec();
      else if (full == "initial.velocity_min") c.velocity.lo = vec();
      else if (full == "initial.velocity_max") c.velocity.hi = vec();
      else if (full == "body.g") c.g_nominal = vec();
      else if (full == "body.g_spread") c.g_spread = num();
      else if (full == "body.g_min") { c.g_range.lo = vec(); c.g_componentwise = true; }
      else if (full == "body.g_max") { c.g_range.hi = vec(); c.g_componentwise = true; }
      else if (full == "body.omega_min") c.omega_range.lo = vec();
      else if (full == "body.omega_max") c.omega_range.hi = vec();
      else if (full == "body.srp_min") c.srp_range.lo = vec();
      else if (full == "body.srp_max") c.srp_range.hi = vec();
      else if (full == "body.r_offset") c.r_offset = vec();
      else if (full == "body.isp") c.isp = num();
      else if (full == "body.g_ref") c.g_ref = num();
      else if (full == "body.wet_mass_min") c.wet_mass.lo = num();
      else if (full == "body.wet_mass_max") c.wet_mass.hi = num();
      else if (full == "body.dry_mass") c.dry_mass = num();
      else if (full == "body.f_env_sigma") c.f_env_sigma = vec();
      else if (full == "thrust.mode") {
        if (value == "band") c.thrust_mode = ThrustMode::MagnitudeBand;
        else if (value == "pulsed") c.thrust_mode = ThrustMode::Pulsed;
        else throw Error(ErrorCode::ParseError, full + ": band|pulsed");
      }
      else if (full == "thrust.t_min") c.t_min = num();
      else if (full == "thrust.t_max") c.t_max = num();
      else if (full == "failure.p_fail") c.p_fail = num();
      else if (full == "failure.lateral_factor") c.lateral_failure_factor = num();
      else if (full == "failure.vertical_factor") c.vertical_failure_factor = num();
      else if (full == "reward.alpha") c.alpha = num();
      else if (full == "reward.beta") c.beta = num();
      else if (full == "reward.gamma") c.gamma_const = num();
      else if (full == "reward.eta") c.eta = num();
      else if (full == "reward.abort_penalty") c.abort_penalty = num();
      else if (full == "shaping.v_o") { c.v_o = num(); c.capture_v_o = false; }
      else if (full == "shaping.capture_v_o") c.capture_v_o = parse_bool(value, full);
      else if (full == "shaping.tau1") c.tau1 = num();
      else if (full == "shaping.tau2") c.tau2 = num();
      else if (full == "shaping.hover_altitude") c.hover_altitude = num();
      else if (full == "shaping.vz_target_high") c.vz_target_high = num();
      else if (full == "shaping.vz_target_low") c.vz_target_low = num();
      else if (full == "shaping.mode") {
        if (value == "piecewise") c.shaping = ShapingMode::Piecewise;
        else if (value == "single") c.shaping = ShapingMode::SingleBranch;
        else throw Error(ErrorCode::ParseError, full + ": piecewise|single");
      }
      else if (full == "terminal.r_lim") c.r_lim = num();
      else if (full == "terminal.v_lim") c.v_lim = num();
      else if (full == "terminal.gs_lim") c.gs_lim = num();
      else if (full == "terminal.range_limit") c.range_limit = num();
      else if (full == "discount.gamma1") c.gamma1 = num();
      else if (full == "discount.gamma2") c.gamma2 = num();
      else if (full == "observation.mode") {
        if (value == "state") c.obs_mode = ObservationMode::State;
        else if (value == "altimeter") c.obs_mode = ObservationMode::Altimeter;
        else if (value == "altimeter-pointing")
          c.obs_mode = ObservationMode::AltimeterTargetPointing;
        else throw Error(ErrorCode::ParseError,
                         full + ": state|altimeter|altimeter-pointing");
      }
      else if (full == "observation.dtm_target") c.dtm_target = vec();
      else if (full == "observation.altimeter_scale") c.altimeter_scale = num();
      else if (full == "episode.dt") c.dt = num();
      else if (full == "episode.max_steps") c.max_steps = static_cast<int>(num());
      else throw Error(ErrorCode::ConfigError, "unknown config key '" + full + "'");
    }
  }
}

inline boost::property_tree::ptree read_config_tree(const std::string& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return tree;
}

inline boost::property_tree::ptree parse_config_text(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return tree;
}

// Builds a config from a tree: [scenario] base selects the preset (falling
// back to `fallback_key`), then every other section overrides it.
inline EnvConfig env_config_from_tree(const boost::property_tree::ptree& tree,
                                      std::string_view fallback_key) {
  const std::string base =
      tree.get<std::string>("scenario.base", std::string(fallback_key));
  EnvConfig c = scenario_config(base);
  apply_overrides(c, tree);
  c.validate();
  return c;
}

}  // namespace metaland
