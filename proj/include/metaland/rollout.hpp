// Agent container, rollout collection with recorded hidden states, padding
// into T-step segments, and dual-discount return/advantage targets.
#pragma once

#include <concepts>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "metaland/lander_env.hpp"
#include "metaland/nets.hpp"
#include "metaland/optim.hpp"

namespace metaland {

template <class E>
concept Environment = requires(E& env, const E& cenv, Rng& rng,
                               std::span<const double> action) {
  { cenv.obs_dim() } -> std::convertible_to<int>;
  { cenv.act_dim() } -> std::convertible_to<int>;
  { env.reset(rng) } -> std::same_as<Eigen::VectorXd>;
  { env.step(action, rng) } -> std::same_as<StepOutcome>;
  { cenv.summary() } -> std::convertible_to<EpisodeSummary>;
};

// Policy and value networks plus the observation normalizer they read
// through. `unroll` is the BPTT segment length (1 for non-recurrent nets).
struct Agent {
  NetParams policy;
  NetParams value;
  ObsScaler scaler;
  int unroll = 1;

  bool recurrent() const { return policy.spec.recurrent; }
  int obs_dim() const { return policy.spec.input_dim; }
  int act_dim() const { return policy.spec.output_dim; }
};

inline Agent make_agent(int obs_dim, int act_dim, bool recurrent, int unroll,
                        Rng& rng, double initial_std = 0.6) {
  if (unroll < 1) throw Error(ErrorCode::ConfigError, "unroll must be >= 1");
  Agent a;
  a.policy = init_params(LayerSpec::policy(obs_dim, act_dim, recurrent), rng,
                         true, initial_std, 0.1);
  a.value = init_params(LayerSpec::value(obs_dim, recurrent), rng, false);
  a.scaler = ObsScaler(obs_dim);
  a.unroll = recurrent ? unroll : 1;
  return a;
}

struct EpisodeRollout {
  Mat obs;      // normalized observations fed to the networks
  Mat raw_obs;  // environment observations
  Mat actions;
  Eigen::VectorXd log_prob;
  Eigen::VectorXd r1;
  Eigen::VectorXd r2;
  Mat policy_hidden;  // hidden state entering the GRU at each step
  Mat value_hidden;
  EpisodeSummary summary;
  std::uint64_t seed = 0;

  int length() const { return static_cast<int>(obs.rows()); }
  double total_reward() const { return r1.sum() + r2.sum(); }
};

using RolloutSet = std::vector<EpisodeRollout>;

// Runs `seeds.size()` episodes in lockstep, one network row per live
// episode. Every step stores the pre-step hidden states of both networks.
// `stochastic` samples from the Gaussian head, otherwise the mean is used.
template <Environment Env>
RolloutSet collect_rollouts(const std::function<Env()>& make_env,
                            const Agent& agent,
                            const std::vector<std::uint64_t>& seeds,
                            bool stochastic) {
  const int n = static_cast<int>(seeds.size());
  const int obs_dim = agent.obs_dim();
  const int act_dim = agent.act_dim();
  const int hp_dim = agent.policy.spec.h2;
  const int hv_dim = agent.value.spec.h2;

  std::vector<Env> envs;
  std::vector<Rng> rngs;
  envs.reserve(n);
  rngs.reserve(n);
  std::vector<std::vector<RowVec>> obs(n), raw(n), acts(n), hps(n), hvs(n);
  std::vector<std::vector<double>> lps(n), r1s(n), r2s(n);
  std::vector<Eigen::VectorXd> current(n);
  std::vector<int> live;
  for (int i = 0; i < n; ++i) {
    envs.push_back(make_env());
    rngs.emplace_back(seeds[i]);
    current[i] = envs[i].reset(rngs[i]);
    if (envs[i].obs_dim() != obs_dim || envs[i].act_dim() != act_dim) {
      throw Error(ErrorCode::ShapeError, "environment/agent dimension mismatch");
    }
    live.push_back(i);
  }
  Mat hp = Mat::Zero(n, hp_dim);
  Mat hv = Mat::Zero(n, hv_dim);
  RolloutSet out(n);

  while (!live.empty()) {
    const int k = static_cast<int>(live.size());
    Mat x(k, obs_dim);
    Mat hp_live(k, hp_dim);
    Mat hv_live(k, hv_dim);
    for (int j = 0; j < k; ++j) {
      const int i = live[j];
      x.row(j) = agent.scaler.apply(current[i]);
      hp_live.row(j) = hp.row(i);
      hv_live.row(j) = hv.row(i);
    }
    const Mat hp_before = hp_live;
    const Mat hv_before = hv_live;
    const Mat mean = step_forward(agent.policy, x, hp_live);
    step_forward(agent.value, x, hv_live);

    std::vector<int> still;
    for (int j = 0; j < k; ++j) {
      const int i = live[j];
      RowVec action;
      double lp;
      if (stochastic) {
        ActionSample s = sample_action(mean.row(j), agent.policy.log_std, rngs[i]);
        action = std::move(s.action);
        lp = s.log_prob;
      } else {
        action = mean.row(j);
        lp = log_prob(mean.row(j), agent.policy.log_std, action);
      }
      obs[i].push_back(x.row(j));
      raw[i].push_back(current[i].transpose());
      acts[i].push_back(action);
      hps[i].push_back(hp_before.row(j));
      hvs[i].push_back(hv_before.row(j));
      lps[i].push_back(lp);
      const StepOutcome step = envs[i].step(
          std::span<const double>(action.data(), action.size()), rngs[i]);
      r1s[i].push_back(step.r1);
      r2s[i].push_back(step.r2);
      current[i] = step.observation;
      hp.row(i) = hp_live.row(j);
      hv.row(i) = hv_live.row(j);
      if (!step.done) still.push_back(i);
    }
    live = std::move(still);
  }

  auto stack = [](const std::vector<RowVec>& rows, int cols) {
    Mat m(static_cast<Eigen::Index>(rows.size()), cols);
    for (std::size_t t = 0; t < rows.size(); ++t) m.row(t) = rows[t];
    return m;
  };
  auto vec = [](const std::vector<double>& v) {
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(
        v.data(), static_cast<Eigen::Index>(v.size())));
  };
  for (int i = 0; i < n; ++i) {
    EpisodeRollout& e = out[i];
    e.obs = stack(obs[i], obs_dim);
    e.raw_obs = stack(raw[i], obs_dim);
    e.actions = stack(acts[i], act_dim);
    e.policy_hidden = stack(hps[i], hp_dim);
    e.value_hidden = stack(hvs[i], hv_dim);
    e.log_prob = vec(lps[i]);
    e.r1 = vec(r1s[i]);
    e.r2 = vec(r2s[i]);
    e.summary = envs[i].summary();
    e.seed = seeds[i];
  }
  return out;
}

// Episode seeds for batch `batch_index` of a run with `master_seed`.
inline std::vector<std::uint64_t> episode_seeds(std::uint64_t master_seed,
                                                std::uint64_t stream,
                                                std::uint64_t batch_index,
                                                int count) {
  std::vector<std::uint64_t> seeds(count);
  for (int i = 0; i < count; ++i) {
    seeds[i] = derive_seed(master_seed, stream,
                           batch_index * 1000003ULL + static_cast<std::uint64_t>(i));
  }
  return seeds;
}

// ---------------------------------------------------------------------------
// padding

// Training batch in segment layout: each episode is padded with masked
// filler rows to a multiple of `unroll`, so rows s*T .. s*T+T-1 belong to
// one episode and segment s is seeded with the hidden state recorded at its
// first row.
struct Batch {
  int unroll = 1;
  Mat obs;
  Mat actions;
  Eigen::VectorXd log_prob_old;
  Eigen::VectorXd r1;
  Eigen::VectorXd r2;
  Eigen::VectorXd mask;  // 1 valid, 0 filler
  Mat policy_hidden0;    // segments x h2 (policy)
  Mat value_hidden0;     // segments x h2 (value)
  std::vector<int> episode_start;
  std::vector<int> episode_length;
  Eigen::VectorXd returns;
  Eigen::VectorXd advantages;

  Eigen::Index rows() const { return obs.rows(); }
  Eigen::Index segments() const { return obs.rows() / unroll; }
  double valid_count() const { return mask.sum(); }
};

inline int padded_length(int length, int unroll) {
  return (length + unroll - 1) / unroll * unroll;
}

inline Batch pad_for_unroll(const RolloutSet& rollouts, int unroll) {
  if (unroll < 1) throw Error(ErrorCode::ConfigError, "unroll must be >= 1");
  if (rollouts.empty()) throw Error(ErrorCode::ShapeError, "empty rollout set");
  Batch b;
  b.unroll = unroll;
  Eigen::Index total = 0;
  for (const auto& e : rollouts) total += padded_length(e.length(), unroll);
  const auto& first = rollouts.front();
  b.obs = Mat::Zero(total, first.obs.cols());
  b.actions = Mat::Zero(total, first.actions.cols());
  b.log_prob_old = Eigen::VectorXd::Zero(total);
  b.r1 = Eigen::VectorXd::Zero(total);
  b.r2 = Eigen::VectorXd::Zero(total);
  b.mask = Eigen::VectorXd::Zero(total);
  b.policy_hidden0 = Mat::Zero(total / unroll, first.policy_hidden.cols());
  b.value_hidden0 = Mat::Zero(total / unroll, first.value_hidden.cols());
  Eigen::Index row = 0;
  for (const auto& e : rollouts) {
    const int n = e.length();
    b.episode_start.push_back(static_cast<int>(row));
    b.episode_length.push_back(n);
    b.obs.middleRows(row, n) = e.obs;
    b.actions.middleRows(row, n) = e.actions;
    b.log_prob_old.segment(row, n) = e.log_prob;
    b.r1.segment(row, n) = e.r1;
    b.r2.segment(row, n) = e.r2;
    b.mask.segment(row, n).setOnes();
    for (int t = 0; t < n; t += unroll) {
      const Eigen::Index seg = (row + t) / unroll;
      b.policy_hidden0.row(seg) = e.policy_hidden.row(t);
      b.value_hidden0.row(seg) = e.value_hidden.row(t);
    }
    row += padded_length(n, unroll);
  }
  return b;
}

// ---------------------------------------------------------------------------
// returns and advantages

// G_t = sum_{k>=t} gamma1^(k-t) r1_k + gamma2^(k-t) r2_k within each episode.
inline Eigen::VectorXd discounted_returns(const Batch& b, double gamma1,
                                          double gamma2) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(b.rows());
  for (std::size_t e = 0; e < b.episode_start.size(); ++e) {
    const int start = b.episode_start[e];
    double g1 = 0.0;
    double g2 = 0.0;
    for (int t = b.episode_length[e] - 1; t >= 0; --t) {
      g1 = b.r1[start + t] + gamma1 * g1;
      g2 = b.r2[start + t] + gamma2 * g2;
      g[start + t] = g1 + g2;
    }
  }
  return g;
}

// Single-discount return on the summed reward.
inline Eigen::VectorXd discounted_returns(const Batch& b, double gamma) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(b.rows());
  for (std::size_t e = 0; e < b.episode_start.size(); ++e) {
    const int start = b.episode_start[e];
    double acc = 0.0;
    for (int t = b.episode_length[e] - 1; t >= 0; --t) {
      acc = b.r1[start + t] + b.r2[start + t] + gamma * acc;
      g[start + t] = acc;
    }
  }
  return g;
}

inline Eigen::VectorXd value_predictions(const NetParams& value, const Batch& b) {
  const Mat v = forward(value, b.obs, b.value_hidden0, b.unroll);
  return v.col(0);
}

// Standardizes valid entries to zero mean / unit std; filler stays 0.
inline void normalize_masked(Eigen::VectorXd& x, const Eigen::VectorXd& mask) {
  const double n = mask.sum();
  if (n < 1.0) return;
  const double mean = x.cwiseProduct(mask).sum() / n;
  double var = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (mask[i] > 0.0) var += (x[i] - mean) * (x[i] - mean);
  }
  const double sd = std::sqrt(var / n);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x[i] = mask[i] > 0.0 ? (x[i] - mean) / (sd + 1e-8) : 0.0;
  }
}

// Fills b.returns (dual-discount) and b.advantages = returns - V(x).
inline void returns_and_advantages(Batch& b, const NetParams& value,
                                   double gamma1, double gamma2,
                                   bool normalize = true) {
  b.returns = discounted_returns(b, gamma1, gamma2);
  b.advantages = (b.returns - value_predictions(value, b)).cwiseProduct(b.mask);
  if (normalize) normalize_masked(b.advantages, b.mask);
}

}  // namespace metaland
