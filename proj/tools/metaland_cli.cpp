#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "metaland/metaland.hpp"

namespace {

using namespace metaland;

struct Options {
  std::string config;
  std::optional<std::string> scenario;
  std::optional<std::string> policy;
  std::vector<std::string> policies;
  std::optional<std::uint64_t> seed;
  std::optional<int> unroll;
  std::optional<int> episodes;
  std::optional<int> updates;
  std::optional<std::string> out;
  std::string checkpoint;
  std::vector<double> elevations{400.0, 500.0, 600.0, 700.0, 800.0};
  int samples = 10000;
  bool quiet = false;
};

RunConfig build_run(const Options& o) {
  boost::property_tree::ptree tree;
  if (!o.config.empty()) tree = read_config_tree(o.config);
  if (o.scenario) tree.put("scenario.base", *o.scenario);
  if (o.policy) tree.put("run.policy", *o.policy);
  if (o.unroll) tree.put("run.unroll", *o.unroll);
  if (o.seed) tree.put("run.seed", *o.seed);
  if (o.episodes) tree.put("run.eval_episodes", *o.episodes);
  if (o.updates) tree.put("run.updates", *o.updates);
  if (o.out) tree.put("run.out", *o.out);
  return run_config_from_tree(tree, "mars");
}

void print_stats_table(const std::vector<CompareRow>& rows) {
  std::printf("%-8s %6s %8s %10s %10s %10s %10s %10s %10s %8s %9s\n", "policy",
              "n", "success", "r_mean", "r_std", "r_max", "v_mean", "v_std",
              "v_max", "gs_min", "fuel");
  for (const auto& r : rows) {
    const StatsTable& t = r.stats;
    std::printf("%-8s %6d %8.3f %10.3f %10.3f %10.3f %10.3f %10.3f %10.3f %8.2f %9.2f\n",
                r.policy.label().c_str(), t.episodes, t.success_rate,
                t.position.mean, t.position.std, t.position.max, t.velocity.mean,
                t.velocity.std, t.velocity.max, t.glideslope.min, t.fuel.mean);
  }
}

int run_train(const Options& o) {
  const RunConfig run = build_run(o);
  const TrainResult res = train(run, [&](const UpdateRecord& u) {
    if (o.quiet) return;
    std::printf("update %4d  r %9.3f  v %8.3f  success %.2f  return %9.2f  kl %.5f  eps %.3f\n",
                u.update, u.batch.position.mean, u.batch.velocity.mean,
                u.batch.success_rate, u.mean_return, u.diag.kl, u.diag.epsilon);
    std::fflush(stdout);
  });
  std::printf("checkpoint %s\n", res.checkpoint.string().c_str());
  return 0;
}

int run_evaluate(const Options& o) {
  const RunConfig run = build_run(o);
  std::optional<std::filesystem::path> ck;
  if (!o.checkpoint.empty()) ck = o.checkpoint;
  const EvalResult res = evaluate(run, ck);
  if (res.drdv_gravity_scale) {
    std::printf("drdv gravity scale %g\n", *res.drdv_gravity_scale);
  }
  print_stats_table({{run.policy, res.stats}});
  std::printf("episodes %s\n", (run.run_dir() / "episodes.csv").string().c_str());
  return 0;
}

int run_compare(const Options& o) {
  const RunConfig run = build_run(o);
  std::vector<PolicyChoice> choices;
  for (const auto& key : o.policies) {
    choices.push_back(PolicyChoice::parse(key, o.unroll.value_or(20)));
  }
  if (choices.empty()) choices.push_back(run.policy);
  const auto rows = compare(run.out_dir, run.scenario, choices);
  std::printf("scenario %s\n", run.scenario.c_str());
  print_stats_table(rows);
  return 0;
}

int run_characterize(const Options& o) {
  const RunConfig run = build_run(o);
  const auto path = std::filesystem::path(run.out_dir) / "altimeter" / "error_table.csv";
  const auto rows =
      characterize_altimeter(run.terrain, run.seed, o.elevations, o.samples, path);
  std::printf("%10s %12s %12s %12s %8s\n", "elevation", "mean_err", "std_err",
              "max_err", "miss%");
  for (const auto& r : rows) {
    std::printf("%10.1f %12.3f %12.3f %12.3f %8.2f\n", r.elevation, r.mean_error,
                r.std_error, r.max_error, r.miss_percent);
  }
  std::printf("table %s\n", path.string().c_str());
  return 0;
}

void print_error(const std::string& code, const std::string& message) {
  nlohmann::json j{{"error", code}, {"message", message}};
  std::cerr << j.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recurrent meta-RL landing guidance: train, evaluate, compare"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "INI file with run/env overrides")
        ->check(CLI::ExistingFile);
    sub->add_option("--scenario", o.scenario,
                    "mars | mars-failure | mars-highmass | mars-altimeter | "
                    "mars-altimeter-pointing | asteroid | toy | point-mass");
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--out", o.out, "output directory");
    sub->add_flag("--quiet", o.quiet, "suppress progress lines");
  };
  auto policy = [&](CLI::App* sub) {
    sub->add_option("--policy", o.policy, "drdv | mlp | rnn | rnn<T>");
    sub->add_option("--unroll", o.unroll, "recurrent unroll length T")
        ->check(CLI::PositiveNumber);
  };

  CLI::App* train_cmd = app.add_subcommand("train", "train a policy with PPO");
  common(train_cmd);
  policy(train_cmd);
  train_cmd->add_option("--updates", o.updates, "number of PPO updates")
      ->check(CLI::NonNegativeNumber);

  CLI::App* eval_cmd = app.add_subcommand("evaluate", "Monte Carlo evaluation");
  common(eval_cmd);
  policy(eval_cmd);
  eval_cmd->add_option("--episodes", o.episodes, "evaluation episodes")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--checkpoint", o.checkpoint,
                       "checkpoint file (default <out>/<scenario>/<policy>/checkpoint.txt)");

  CLI::App* cmp_cmd = app.add_subcommand("compare", "tabulate stored evaluations");
  common(cmp_cmd);
  cmp_cmd->add_option("--policy", o.policies, "policy keys (repeatable)");
  cmp_cmd->add_option("--unroll", o.unroll, "T for a bare 'rnn' key");

  CLI::App* alt_cmd = app.add_subcommand("characterize-altimeter",
                                         "altimeter error versus elevation");
  common(alt_cmd);
  alt_cmd->add_option("--elevations", o.elevations, "sensor elevations (m)");
  alt_cmd->add_option("--samples", o.samples, "rays per elevation")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("UsageError", e.what());
    return 2;
  }

  try {
    if (*train_cmd) return run_train(o);
    if (*eval_cmd) return run_evaluate(o);
    if (*cmp_cmd) return run_compare(o);
    if (*alt_cmd) return run_characterize(o);
  } catch (const Error& e) {
    print_error(to_string(e.code()), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("InternalError", e.what());
    return 1;
  }
  return 0;
}
