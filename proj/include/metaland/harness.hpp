// Run orchestration: configuration, seeded training with learning-curve CSV
// and checkpoints, Monte Carlo evaluation, comparison tables and altimeter
// characterization.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>

#include "metaland/altimeter.hpp"
#include "metaland/checkpoint.hpp"
#include "metaland/drdv.hpp"
#include "metaland/env_config.hpp"
#include "metaland/lander_env.hpp"
#include "metaland/point_mass.hpp"
#include "metaland/ppo.hpp"
#include "metaland/rollout.hpp"
#include "metaland/terrain.hpp"

namespace metaland {

// ---------------------------------------------------------------------------
// policies

enum class PolicyKind { Drdv, Mlp, Rnn };

struct PolicyChoice {
  PolicyKind kind = PolicyKind::Mlp;
  int unroll = 1;  // recurrent unroll T

  // "drdv", "mlp", "rnn" (with `unroll`), or "rnn<T>".
  static PolicyChoice parse(const std::string& key, int unroll = 20) {
    PolicyChoice p;
    if (key == "drdv") {
      p.kind = PolicyKind::Drdv;
    } else if (key == "mlp") {
      p.kind = PolicyKind::Mlp;
    } else if (key.rfind("rnn", 0) == 0) {
      p.kind = PolicyKind::Rnn;
      p.unroll = unroll;
      if (key.size() > 3) {
        try {
          std::size_t used = 0;
          p.unroll = std::stoi(key.substr(3), &used);
          if (used != key.size() - 3) throw std::invalid_argument(key);
        } catch (const std::exception&) {
          throw Error(ErrorCode::ConfigError, "bad policy key '" + key + "'");
        }
      }
      if (p.unroll < 1) throw Error(ErrorCode::ConfigError, "unroll must be >= 1");
    } else {
      throw Error(ErrorCode::ConfigError,
                  "unknown policy '" + key + "' (drdv|mlp|rnn|rnn<T>)");
    }
    return p;
  }

  std::string key() const {
    switch (kind) {
      case PolicyKind::Drdv: return "drdv";
      case PolicyKind::Mlp: return "mlp";
      case PolicyKind::Rnn: return "rnn" + std::to_string(unroll);
    }
    return "?";
  }

  std::string label() const {
    switch (kind) {
      case PolicyKind::Drdv: return "DR/DV";
      case PolicyKind::Mlp: return "MLP";
      case PolicyKind::Rnn: return "RNN " + std::to_string(unroll);
    }
    return "?";
  }

  // DR/DV first, then MLP, then recurrent policies by ascending T.
  int order() const {
    switch (kind) {
      case PolicyKind::Drdv: return -2;
      case PolicyKind::Mlp: return -1;
      case PolicyKind::Rnn: return unroll;
    }
    return 0;
  }

  bool learned() const { return kind != PolicyKind::Drdv; }
};

// ---------------------------------------------------------------------------
// run configuration

inline constexpr const char* kPointMassScenario = "point-mass";

struct TerrainSource {
  std::string file;             // grid file; synthetic when empty
  std::uint64_t seed = 7;       // synthetic seed
  int size = 1024;
  double cell_size = 10.0;
  double plane_spacing = 10.0;
  bool mirror = true;
};

struct RunConfig {
  std::string scenario = "mars";
  EnvConfig env = mars_nominal_config();
  PolicyChoice policy;
  std::uint64_t seed = 1;
  int updates = 400;
  int episodes_per_update = 30;
  int eval_episodes = 1000;
  int checkpoint_every = 50;
  std::string out_dir = "runs";
  UpdateConfig ppo;
  double initial_std = 0.3;
  DrdvConfig drdv;
  std::optional<double> drdv_gravity_scale;  // fixed; tuned when empty
  std::vector<double> drdv_gravity_grid{0.5, 1.0, 2.0, 4.0, 8.0, 16.0};
  int drdv_tune_episodes = 60;
  TerrainSource terrain;

  // Directory holding this run's outputs: <out>/<scenario>/<policy key>.
  std::filesystem::path run_dir() const {
    return std::filesystem::path(out_dir) / scenario / policy.key();
  }

  void validate() const {
    if (updates < 0) throw Error(ErrorCode::ConfigError, "updates must be >= 0");
    if (episodes_per_update < 1) {
      throw Error(ErrorCode::ConfigError, "episodes per update must be >= 1");
    }
    if (eval_episodes < 1) {
      throw Error(ErrorCode::ConfigError, "evaluation episodes must be >= 1");
    }
    if (checkpoint_every < 1) {
      throw Error(ErrorCode::ConfigError, "checkpoint_every must be >= 1");
    }
    if (policy.unroll < 1) throw Error(ErrorCode::ConfigError, "unroll must be >= 1");
    if (!(ppo.epsilon > 0.0 && ppo.epsilon <= 0.5)) {
      throw Error(ErrorCode::ConfigError, "epsilon must lie in (0, 0.5]");
    }
    env.validate();
  }
};

inline RunConfig make_run_config(const std::string& scenario) {
  RunConfig r;
  r.scenario = scenario;
  r.env = scenario == kPointMassScenario ? toy_config() : scenario_config(scenario);
  r.drdv = drdv_defaults(r.env);
  r.ppo.gamma1 = r.env.gamma1;
  r.ppo.gamma2 = r.env.gamma2;
  return r;
}

// Reads [scenario] base, [run], [ppo], [drdv] and [terrain] plus every
// environment section (see apply_overrides).
//   [run]   seed, updates, episodes_per_update, eval_episodes,
//           checkpoint_every, policy, unroll, out
//   [ppo]   epsilon, kl_target, kl_stop_factor, lr_policy, lr_value,
//           policy_epochs, value_epochs, value_minibatch_rows,
//           normalize_advantages, initial_std
//   [drdv]  gravity_scale, gravity_grid, tune_episodes, time_weight,
//           use_gate, gate_point, gate_velocity, gate_switch_tgo,
//           touchdown_velocity, hover_tgo, fixed_horizon
//   [terrain] file, seed, size, cell_size, plane_spacing, mirror
inline RunConfig run_config_from_tree(const boost::property_tree::ptree& tree,
                                      const std::string& fallback_scenario) {
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_vec3;
  const std::string scenario =
      tree.get<std::string>("scenario.base", fallback_scenario);
  RunConfig r = make_run_config(scenario);
  if (scenario != kPointMassScenario) {
    apply_overrides(r.env, tree);
    r.drdv = drdv_defaults(r.env);
  }
  r.ppo.gamma1 = r.env.gamma1;
  r.ppo.gamma2 = r.env.gamma2;
  std::string policy_key = r.policy.key();
  int unroll = 20;
  for (const auto& [section, body] : tree) {
    if (section != "run" && section != "ppo" && section != "drdv" &&
        section != "terrain" && section != "scenario") {
      continue;
    }
    for (const auto& [key, node] : body) {
      const std::string full = section + "." + key;
      const std::string value = node.get_value<std::string>();
      auto num = [&] { return parse_double(value, full); };
      auto integer = [&] {
        const double v = num();
        if (v != std::floor(v)) {
          throw Error(ErrorCode::ParseError, full + ": expected an integer");
        }
        return static_cast<long long>(v);
      };
      if (full == "scenario.base") continue;
      else if (full == "run.seed") r.seed = static_cast<std::uint64_t>(integer());
      else if (full == "run.updates") r.updates = static_cast<int>(integer());
      else if (full == "run.episodes_per_update") r.episodes_per_update = static_cast<int>(integer());
      else if (full == "run.eval_episodes") r.eval_episodes = static_cast<int>(integer());
      else if (full == "run.checkpoint_every") r.checkpoint_every = static_cast<int>(integer());
      else if (full == "run.policy") policy_key = value;
      else if (full == "run.unroll") unroll = static_cast<int>(integer());
      else if (full == "run.out") r.out_dir = value;
      else if (full == "ppo.epsilon") r.ppo.epsilon = num();
      else if (full == "ppo.kl_target") r.ppo.kl_target = num();
      else if (full == "ppo.kl_stop_factor") r.ppo.kl_stop_factor = num();
      else if (full == "ppo.lr_policy") r.ppo.lr_policy = num();
      else if (full == "ppo.lr_value") r.ppo.lr_value = num();
      else if (full == "ppo.policy_epochs") r.ppo.policy_epochs = static_cast<int>(integer());
      else if (full == "ppo.value_epochs") r.ppo.value_epochs = static_cast<int>(integer());
      else if (full == "ppo.value_minibatch_rows") r.ppo.value_minibatch_rows = static_cast<int>(integer());
      else if (full == "ppo.normalize_advantages") r.ppo.normalize_advantages = parse_bool(value, full);
      else if (full == "ppo.initial_std") r.initial_std = num();
      else if (full == "drdv.gravity_scale") r.drdv_gravity_scale = num();
      else if (full == "drdv.gravity_grid") {
        r.drdv_gravity_grid.clear();
        std::istringstream in(value);
        std::string token;
        while (in >> token) {
          if (token.back() == ',') token.pop_back();
          r.drdv_gravity_grid.push_back(parse_double(token, full));
        }
        if (r.drdv_gravity_grid.empty()) {
          throw Error(ErrorCode::ParseError, full + ": empty grid");
        }
      }
      else if (full == "drdv.tune_episodes") r.drdv_tune_episodes = static_cast<int>(integer());
      else if (full == "drdv.time_weight") r.drdv.time_weight = num();
      else if (full == "drdv.use_gate") r.drdv.use_gate = parse_bool(value, full);
      else if (full == "drdv.gate_point") r.drdv.gate_point = parse_vec3(value, full);
      else if (full == "drdv.gate_velocity") r.drdv.gate_velocity = parse_vec3(value, full);
      else if (full == "drdv.gate_switch_tgo") r.drdv.gate_switch_tgo = num();
      else if (full == "drdv.touchdown_velocity") r.drdv.touchdown_velocity = parse_vec3(value, full);
      else if (full == "drdv.hover_tgo") r.drdv.hover_tgo = num();
      else if (full == "drdv.fixed_horizon") r.drdv.fixed_horizon = parse_bool(value, full);
      else if (full == "terrain.file") r.terrain.file = value;
      else if (full == "terrain.seed") r.terrain.seed = static_cast<std::uint64_t>(integer());
      else if (full == "terrain.size") r.terrain.size = static_cast<int>(integer());
      else if (full == "terrain.cell_size") r.terrain.cell_size = num();
      else if (full == "terrain.plane_spacing") r.terrain.plane_spacing = num();
      else if (full == "terrain.mirror") r.terrain.mirror = parse_bool(value, full);
      else throw Error(ErrorCode::ConfigError, "unknown config key '" + full + "'");
    }
  }
  r.policy = PolicyChoice::parse(policy_key, unroll);
  r.validate();
  return r;
}

inline std::shared_ptr<const TerrainMap> make_terrain(const TerrainSource& src) {
  TerrainMap map = src.file.empty()
                       ? synthetic_terrain(src.seed, src.size, src.cell_size)
                       : load_terrain(src.file, src.plane_spacing);
  if (src.mirror) map = mirror_map(map);
  return std::make_shared<const TerrainMap>(std::move(map));
}

// ---------------------------------------------------------------------------
// statistics

struct MetricStats {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation (divides by n)
  double max = 0.0;
  double min = 0.0;
};

inline MetricStats metric_stats(const std::vector<double>& xs) {
  MetricStats s;
  if (xs.empty()) return s;
  double sum = 0.0;
  s.max = xs.front();
  s.min = xs.front();
  for (double x : xs) {
    sum += x;
    s.max = std::max(s.max, x);
    s.min = std::min(s.min, x);
  }
  s.mean = sum / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(xs.size()));
  return s;
}

struct StatsTable {
  int episodes = 0;
  MetricStats position;
  MetricStats velocity;
  MetricStats glideslope;
  MetricStats fuel;
  double success_rate = 0.0;
};

inline StatsTable compute_stats(const std::vector<EpisodeSummary>& eps) {
  StatsTable t;
  std::vector<double> r, v, gs, fuel;
  int success = 0;
  for (const auto& e : eps) {
    if (e.cause == TerminationCause::None) continue;
    r.push_back(e.position_error);
    v.push_back(e.velocity_error);
    gs.push_back(e.glideslope);
    fuel.push_back(e.fuel);
    success += e.cause == TerminationCause::LandedSuccess;
  }
  t.episodes = static_cast<int>(r.size());
  t.position = metric_stats(r);
  t.velocity = metric_stats(v);
  t.glideslope = metric_stats(gs);
  t.fuel = metric_stats(fuel);
  t.success_rate = t.episodes > 0 ? double(success) / t.episodes : 0.0;
  return t;
}

// Shortest decimal form that parses back to the same double.
inline std::string format_number(double x) {
  char buf[40];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

// ---------------------------------------------------------------------------
// CSV

inline std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline const char* kEpisodeCsvHeader =
    "episode,seed,position_error,velocity_error,glideslope,fuel,steps,cause";

struct EpisodeRecord {
  int episode = 0;
  std::uint64_t seed = 0;
  EpisodeSummary summary;
};

inline void write_episode_csv(const std::filesystem::path& path,
                              const std::vector<EpisodeRecord>& records) {
  std::ofstream out = open_csv(path);
  out << kEpisodeCsvHeader << '\n';
  for (const auto& r : records) {
    const EpisodeSummary& s = r.summary;
    out << r.episode << ',' << r.seed << ',' << format_number(s.position_error)
        << ',' << format_number(s.velocity_error) << ','
        << format_number(s.glideslope) << ',' << format_number(s.fuel) << ','
        << s.steps << ',' << to_string(s.cause) << '\n';
  }
}

inline TerminationCause parse_cause(const std::string& text) {
  for (auto c : {TerminationCause::None, TerminationCause::LandedSuccess,
                 TerminationCause::LandedMiss,
                 TerminationCause::CrashLimitViolation, TerminationCause::Timeout,
                 TerminationCause::MassDepleted}) {
    if (text == to_string(c)) return c;
  }
  throw Error(ErrorCode::ParseError, "unknown termination cause '" + text + "'");
}

inline std::vector<EpisodeRecord> read_episode_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingRun, "missing " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kEpisodeCsvHeader) {
    throw Error(ErrorCode::ParseError, "bad header in " + path.string());
  }
  std::vector<EpisodeRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_csv_line(line);
    if (c.size() != 8) throw Error(ErrorCode::ParseError, "bad row in " + path.string());
    try {
      EpisodeRecord r;
      r.episode = std::stoi(c[0]);
      r.seed = std::stoull(c[1]);
      r.summary.position_error = std::stod(c[2]);
      r.summary.velocity_error = std::stod(c[3]);
      r.summary.glideslope = std::stod(c[4]);
      r.summary.fuel = std::stod(c[5]);
      r.summary.steps = std::stoi(c[6]);
      r.summary.cause = parse_cause(c[7]);
      out.push_back(r);
    } catch (const std::invalid_argument&) {
      throw Error(ErrorCode::ParseError, "bad number in " + path.string());
    } catch (const std::out_of_range&) {
      throw Error(ErrorCode::ParseError, "number out of range in " + path.string());
    }
  }
  return out;
}

inline const char* kStatsCsvHeader =
    "policy,episodes,success_rate,position_mean,position_std,position_max,"
    "velocity_mean,velocity_std,velocity_max,glideslope_mean,glideslope_std,"
    "glideslope_min,fuel_mean,fuel_std,fuel_max";

inline std::string stats_row(const std::string& label, const StatsTable& t) {
  std::ostringstream o;
  auto f = [](double x) { return format_number(x); };
  o << label << ',' << t.episodes << ',' << f(t.success_rate) << ','
    << f(t.position.mean) << ',' << f(t.position.std) << ',' << f(t.position.max)
    << ',' << f(t.velocity.mean) << ',' << f(t.velocity.std) << ','
    << f(t.velocity.max) << ',' << f(t.glideslope.mean) << ','
    << f(t.glideslope.std) << ',' << f(t.glideslope.min) << ','
    << f(t.fuel.mean) << ',' << f(t.fuel.std) << ',' << f(t.fuel.max);
  return o.str();
}

// ---------------------------------------------------------------------------
// seeds: independent streams for initialization, training and evaluation

inline constexpr std::uint64_t kStreamInit = 0;
inline constexpr std::uint64_t kStreamTrain = 1;
inline constexpr std::uint64_t kStreamEval = 2;
inline constexpr std::uint64_t kStreamTune = 3;

inline std::vector<std::uint64_t> eval_seeds(std::uint64_t master, int count) {
  return episode_seeds(master, kStreamEval, 0, count);
}

// ---------------------------------------------------------------------------
// environments

inline std::function<LanderEnv()> lander_factory(const RunConfig& run) {
  std::shared_ptr<const TerrainMap> terrain;
  if (run.env.obs_mode != ObservationMode::State) terrain = make_terrain(run.terrain);
  EnvConfig env = run.env;
  return [env, terrain] { return LanderEnv(env, terrain); };
}

// Calls fn(make_env) with the environment factory for the run's scenario.
template <class Fn>
decltype(auto) with_environment(const RunConfig& run, Fn&& fn) {
  if (run.scenario == kPointMassScenario) {
    std::function<PointMassEnv()> make = [] { return PointMassEnv(); };
    return fn(make);
  }
  return fn(lander_factory(run));
}

// ---------------------------------------------------------------------------
// training

struct UpdateRecord {
  int update = 0;
  StatsTable batch;
  double mean_return = 0.0;
  UpdateDiagnostics diag;
};

inline const char* kCurveCsvHeader =
    "update,episodes,success_rate,position_mean,position_std,position_max,"
    "velocity_mean,velocity_std,velocity_max,mean_return,kl,epsilon,"
    "policy_loss,value_loss,clip_fraction,policy_epochs";

inline std::string curve_row(const UpdateRecord& u) {
  std::ostringstream o;
  auto f = [](double x) { return format_number(x); };
  const StatsTable& t = u.batch;
  o << u.update << ',' << t.episodes << ',' << f(t.success_rate) << ','
    << f(t.position.mean) << ',' << f(t.position.std) << ','
    << f(t.position.max) << ',' << f(t.velocity.mean) << ','
    << f(t.velocity.std) << ',' << f(t.velocity.max) << ','
    << f(u.mean_return) << ',' << f(u.diag.kl) << ',' << f(u.diag.epsilon)
    << ',' << f(u.diag.policy_loss) << ',' << f(u.diag.value_loss_after) << ','
    << f(u.diag.clip_fraction) << ',' << u.diag.policy_epochs;
  return o.str();
}

struct TrainResult {
  Agent agent;
  std::vector<UpdateRecord> curve;
  std::filesystem::path checkpoint;
};

inline std::filesystem::path checkpoint_path(const std::filesystem::path& dir,
                                             int update) {
  char name[32];
  std::snprintf(name, sizeof name, "checkpoint_%05d.txt", update);
  return dir / name;
}

// Collect/update loop. Writes <run_dir>/learning_curve.csv, a checkpoint
// every `checkpoint_every` updates and <run_dir>/checkpoint.txt at the end.
// On NumericalDivergence the last good parameters are saved to
// checkpoint.txt before the error propagates.
inline TrainResult train(const RunConfig& run,
                         const std::function<void(const UpdateRecord&)>& progress = {}) {
  run.validate();
  if (!run.policy.learned()) {
    throw Error(ErrorCode::UsageError, "DR/DV has nothing to train");
  }
  const std::filesystem::path dir = run.run_dir();
  std::filesystem::create_directories(dir);
  return with_environment(run, [&](const auto& make_env) {
    using Env = std::decay_t<decltype(make_env())>;
    const Env probe = make_env();
    Rng init_rng(derive_seed(run.seed, kStreamInit, 0));
    TrainResult result;
    result.agent = make_agent(probe.obs_dim(), probe.act_dim(),
                              run.policy.kind == PolicyKind::Rnn,
                              run.policy.unroll, init_rng, run.initial_std);
    Agent& agent = result.agent;
    PpoState state = make_ppo_state(agent, run.ppo);
    std::ofstream curve = open_csv(dir / "learning_curve.csv");
    curve << kCurveCsvHeader << '\n';
    for (int u = 0; u < run.updates; ++u) {
      const auto seeds = episode_seeds(run.seed, kStreamTrain, u,
                                       run.episodes_per_update);
      const RolloutSet rollouts =
          collect_rollouts<Env>(make_env, agent, seeds, true);
      UpdateRecord rec;
      rec.update = u;
      std::vector<EpisodeSummary> sums;
      for (const auto& e : rollouts) {
        sums.push_back(e.summary);
        rec.mean_return += e.total_reward();
      }
      rec.mean_return /= static_cast<double>(rollouts.size());
      rec.batch = compute_stats(sums);
      Batch batch = pad_for_unroll(rollouts, agent.unroll);
      try {
        rec.diag = ppo_update(batch, agent, state, run.ppo);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::NumericalDivergence) {
          save_checkpoint((dir / "checkpoint.txt").string(), agent);
        }
        throw;
      }
      for (const auto& e : rollouts) agent.scaler.update(e.raw_obs);
      curve << curve_row(rec) << '\n';
      curve.flush();
      result.curve.push_back(rec);
      if (progress) progress(rec);
      if ((u + 1) % run.checkpoint_every == 0) {
        save_checkpoint(checkpoint_path(dir, u + 1).string(), agent);
      }
    }
    result.checkpoint = dir / "checkpoint.txt";
    save_checkpoint(result.checkpoint.string(), agent);
    return result;
  });
}

// ---------------------------------------------------------------------------
// evaluation

struct EvalResult {
  StatsTable stats;
  std::vector<EpisodeRecord> episodes;
  std::optional<double> drdv_gravity_scale;
};

// Deterministic (mean-action) episodes of a learned policy, batched in
// chunks to bound memory.
template <class Env>
std::vector<EpisodeRecord> evaluate_agent(const std::function<Env()>& make_env,
                                          const Agent& agent,
                                          const std::vector<std::uint64_t>& seeds,
                                          int chunk = 100) {
  std::vector<EpisodeRecord> out;
  for (std::size_t first = 0; first < seeds.size(); first += chunk) {
    const std::size_t last = std::min(seeds.size(), first + chunk);
    const std::vector<std::uint64_t> part(seeds.begin() + first,
                                          seeds.begin() + last);
    const RolloutSet rs = collect_rollouts<Env>(make_env, agent, part, false);
    for (std::size_t i = 0; i < rs.size(); ++i) {
      out.push_back({static_cast<int>(first + i), part[i], rs[i].summary});
    }
  }
  return out;
}

inline std::vector<EpisodeRecord> evaluate_drdv(const std::function<LanderEnv()>& make_env,
                                                const DrdvConfig& config,
                                                const std::vector<std::uint64_t>& seeds) {
  std::vector<EpisodeRecord> out;
  LanderEnv env = make_env();
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    Rng rng(seeds[i]);
    out.push_back({static_cast<int>(i), seeds[i], run_drdv_episode(env, rng, config)});
  }
  return out;
}

// Ranks by success rate, then mean terminal position.
inline bool better_stats(const StatsTable& a, const StatsTable& b) {
  if (a.success_rate != b.success_rate) return a.success_rate > b.success_rate;
  return a.position.mean < b.position.mean;
}

// Grid search over the gravity scale assumed by DR/DV, on a seed stream
// disjoint from evaluation. Returns the best scale.
inline double tune_drdv_gravity(const RunConfig& run) {
  const auto make_env = lander_factory(run);
  const auto seeds = episode_seeds(run.seed, kStreamTune, 0, run.drdv_tune_episodes);
  std::optional<double> best;
  StatsTable best_stats;
  for (double k : run.drdv_gravity_grid) {
    DrdvConfig d = run.drdv;
    d.gravity = k * run.env.g_nominal;
    std::vector<EpisodeSummary> sums;
    for (const auto& r : evaluate_drdv(make_env, d, seeds)) sums.push_back(r.summary);
    const StatsTable t = compute_stats(sums);
    if (!best || better_stats(t, best_stats)) {
      best = k;
      best_stats = t;
    }
  }
  return *best;
}

// DR/DV configuration used for a run: randomized-gravity bodies drawn
// componentwise (asteroid) get a tuned gravity scale, everything else flies
// with the true gravity.
inline DrdvConfig resolve_drdv(const RunConfig& run, std::optional<double>* scale_out = nullptr) {
  DrdvConfig d = run.drdv;
  std::optional<double> scale = run.drdv_gravity_scale;
  if (!scale && run.env.g_componentwise) scale = tune_drdv_gravity(run);
  if (scale) d.gravity = *scale * run.env.g_nominal;
  if (scale_out) *scale_out = scale;
  return d;
}

// Runs eval_episodes episodes, writes <run_dir>/episodes.csv and
// <run_dir>/stats.csv. Learned policies read `checkpoint` (default
// <run_dir>/checkpoint.txt); the file is only read.
inline EvalResult evaluate(const RunConfig& run,
                           std::optional<std::filesystem::path> checkpoint = {}) {
  run.validate();
  const std::filesystem::path dir = run.run_dir();
  const auto seeds = eval_seeds(run.seed, run.eval_episodes);
  EvalResult result;
  if (run.policy.learned()) {
    const std::filesystem::path ck = checkpoint.value_or(dir / "checkpoint.txt");
    if (!std::filesystem::exists(ck)) {
      throw Error(ErrorCode::MissingRun, "no checkpoint at " + ck.string());
    }
    const Agent agent = load_checkpoint(ck.string());
    result.episodes = with_environment(run, [&](const auto& make_env) {
      using Env = std::decay_t<decltype(make_env())>;
      return evaluate_agent<Env>(make_env, agent, seeds);
    });
  } else {
    if (run.scenario == kPointMassScenario) {
      throw Error(ErrorCode::UsageError, "DR/DV needs a lander scenario");
    }
    const DrdvConfig d = resolve_drdv(run, &result.drdv_gravity_scale);
    result.episodes = evaluate_drdv(lander_factory(run), d, seeds);
  }
  std::vector<EpisodeSummary> sums;
  for (const auto& r : result.episodes) sums.push_back(r.summary);
  result.stats = compute_stats(sums);
  write_episode_csv(dir / "episodes.csv", result.episodes);
  std::ofstream stats = open_csv(dir / "stats.csv");
  stats << kStatsCsvHeader << '\n' << stats_row(run.policy.label(), result.stats) << '\n';
  return result;
}

// ---------------------------------------------------------------------------
// comparison

struct CompareRow {
  PolicyChoice policy;
  StatsTable stats;
};

// One row per policy, recomputed from <out>/<scenario>/<key>/episodes.csv,
// ordered DR/DV, MLP, then RNN by ascending T. Writes
// <out>/<scenario>/comparison.csv.
inline std::vector<CompareRow> compare(const std::string& out_dir,
                                       const std::string& scenario,
                                       std::vector<PolicyChoice> policies) {
  if (policies.empty()) throw Error(ErrorCode::UsageError, "no policies to compare");
  std::stable_sort(policies.begin(), policies.end(),
                   [](const PolicyChoice& a, const PolicyChoice& b) {
                     return a.order() < b.order();
                   });
  std::vector<CompareRow> rows;
  const std::filesystem::path base = std::filesystem::path(out_dir) / scenario;
  for (const auto& p : policies) {
    const auto path = base / p.key() / "episodes.csv";
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorCode::MissingRun, "no evaluation for " + p.label() +
                                             " at " + path.string());
    }
    std::vector<EpisodeSummary> sums;
    for (const auto& r : read_episode_csv(path)) sums.push_back(r.summary);
    rows.push_back({p, compute_stats(sums)});
  }
  std::ofstream out = open_csv(base / "comparison.csv");
  out << kStatsCsvHeader << '\n';
  for (const auto& r : rows) out << stats_row(r.policy.label(), r.stats) << '\n';
  return rows;
}

// ---------------------------------------------------------------------------
// altimeter characterization

inline std::vector<AltimeterErrorRow> characterize_altimeter(
    const TerrainSource& source, std::uint64_t seed,
    const std::vector<double>& elevations, int samples,
    const std::filesystem::path& out_csv) {
  const auto map = make_terrain(source);
  Rng rng(derive_seed(seed, kStreamEval, 0));
  CharacterizeOptions opts;
  opts.samples = samples;
  const auto rows = characterize_error(*map, rng, elevations, opts);
  std::ofstream out = open_csv(out_csv);
  out << "elevation,mean_error,std_error,max_error,miss_percent,samples\n";
  for (const auto& r : rows) {
    out << format_number(r.elevation) << ',' << format_number(r.mean_error) << ','
        << format_number(r.std_error) << ',' << format_number(r.max_error) << ','
        << format_number(r.miss_percent) << ',' << r.samples << '\n';
  }
  return rows;
}

}  // namespace metaland
