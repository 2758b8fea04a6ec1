// Clipped-surrogate PPO update with KL-targeted clip adaptation.
#pragma once

#include <algorithm>
#include <cmath>

#include "metaland/nets.hpp"
#include "metaland/optim.hpp"
#include "metaland/rollout.hpp"

namespace metaland {

struct UpdateConfig {
  double gamma1 = 0.995;
  double gamma2 = 0.95;
  double epsilon = 0.2;
  double kl_target = 0.001;
  double kl_stop_factor = 4.0;
  double lr_policy = 3e-4;
  double lr_value = 1e-3;
  int policy_epochs = 20;
  int value_epochs = 10;
  int value_minibatch_rows = 2048;  // rounded to whole segments
  bool normalize_advantages = true;
};

// Clip-parameter controller: shrink when KL overshoots 2x target, grow when
// it undershoots target/2.
inline double adapt_clip(double kl, double epsilon, double kl_target = 0.001) {
  if (kl > 2.0 * kl_target) return std::max(epsilon / 1.5, 0.01);
  if (kl < 0.5 * kl_target) return std::min(epsilon * 1.5, 0.5);
  return epsilon;
}

// Per-sample clipped objective min(p A, clip(p, 1-eps, 1+eps) A).
inline double clipped_objective(double ratio, double advantage, double epsilon) {
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

struct PolicyLoss {
  double loss = 0.0;  // negated mean clipped objective over valid rows
  double clip_fraction = 0.0;
  NetParams grad;
  Mat mean;  // policy means for every row
};

// Surrogate loss and its gradient with respect to every policy parameter,
// log_std included. Filler rows carry zero weight.
inline PolicyLoss policy_loss(const NetParams& policy, const Batch& b,
                              double epsilon, bool with_grad = true) {
  PolicyLoss out;
  ForwardCache cache;
  out.mean = forward(policy, b.obs, b.policy_hidden0, b.unroll, &cache);
  const double n = b.valid_count();
  const Eigen::Index act = policy.spec.output_dim;
  const RowVec inv_var = (-2.0 * policy.log_std.array()).exp().matrix();
  Mat d_mean = Mat::Zero(b.rows(), act);
  RowVec d_log_std = RowVec::Zero(act);
  double total = 0.0;
  double clipped = 0.0;
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    if (b.mask[i] <= 0.0) continue;
    const double lp = log_prob(out.mean.row(i), policy.log_std, b.actions.row(i));
    const double ratio = std::exp(lp - b.log_prob_old[i]);
    const double adv = b.advantages[i];
    total += clipped_objective(ratio, adv, epsilon);
    const bool active = ratio * adv <= std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon) * adv;
    if (!active) {
      clipped += 1.0;
      continue;
    }
    if (!with_grad) continue;
    // d(-ratio * A)/d(log p) = -ratio * A
    const double w = -ratio * adv / n;
    for (Eigen::Index j = 0; j < act; ++j) {
      const double diff = b.actions(i, j) - out.mean(i, j);
      d_mean(i, j) = w * diff * inv_var[j];
      d_log_std[j] += w * (diff * diff * inv_var[j] - 1.0);
    }
  }
  out.loss = -total / n;
  out.clip_fraction = clipped / n;
  if (with_grad) {
    out.grad = backward(policy, cache, d_mean);
    out.grad.log_std = d_log_std;
  }
  return out;
}

struct ValueLoss {
  double loss = 0.0;  // mean squared error over valid rows
  NetParams grad;
};

inline ValueLoss value_loss(const NetParams& value, const Batch& b,
                            bool with_grad = true) {
  ValueLoss out;
  ForwardCache cache;
  const Mat v = forward(value, b.obs, b.value_hidden0, b.unroll, &cache);
  const double n = b.valid_count();
  const Eigen::VectorXd err = (v.col(0) - b.returns).cwiseProduct(b.mask);
  out.loss = err.squaredNorm() / n;
  if (with_grad) {
    Mat d = (2.0 / n) * err;
    out.grad = backward(value, cache, d);
  }
  return out;
}

// Mean KL(old || new) over valid rows.
inline double mean_kl(const Mat& mean_old, const RowVec& log_std_old,
                      const Mat& mean_new, const RowVec& log_std_new,
                      const Eigen::VectorXd& mask) {
  double kl = 0.0;
  for (Eigen::Index i = 0; i < mean_old.rows(); ++i) {
    if (mask[i] <= 0.0) continue;
    kl += gaussian_kl(mean_old.row(i), log_std_old, mean_new.row(i), log_std_new);
  }
  return kl / mask.sum();
}

// Contiguous slice of whole segments; keeps the temporal order intact.
inline Batch slice_segments(const Batch& b, Eigen::Index first_segment,
                            Eigen::Index segment_count) {
  Batch s;
  s.unroll = b.unroll;
  const Eigen::Index r0 = first_segment * b.unroll;
  const Eigen::Index nr = segment_count * b.unroll;
  s.obs = b.obs.middleRows(r0, nr);
  s.actions = b.actions.middleRows(r0, nr);
  s.log_prob_old = b.log_prob_old.segment(r0, nr);
  s.r1 = b.r1.segment(r0, nr);
  s.r2 = b.r2.segment(r0, nr);
  s.mask = b.mask.segment(r0, nr);
  s.policy_hidden0 = b.policy_hidden0.middleRows(first_segment, segment_count);
  s.value_hidden0 = b.value_hidden0.middleRows(first_segment, segment_count);
  if (b.returns.size()) s.returns = b.returns.segment(r0, nr);
  if (b.advantages.size()) s.advantages = b.advantages.segment(r0, nr);
  return s;
}

struct PpoState {
  Adam policy_opt;
  Adam value_opt;
  double epsilon = 0.2;
};

inline PpoState make_ppo_state(const Agent& agent, const UpdateConfig& cfg) {
  return PpoState{Adam(agent.policy, cfg.lr_policy),
                  Adam(agent.value, cfg.lr_value), cfg.epsilon};
}

struct UpdateDiagnostics {
  double kl = 0.0;
  double epsilon = 0.0;  // after adaptation
  double epsilon_used = 0.0;
  double policy_loss = 0.0;  // at the start of the update
  double value_loss_before = 0.0;
  double value_loss_after = 0.0;
  double clip_fraction = 0.0;  // at the last evaluated epoch
  int policy_epochs = 0;
};

// One PPO update on a padded batch: advantages from the current value net,
// clipped-surrogate policy epochs with KL early stop, then value regression
// on the dual-discount returns. Restores the previous parameters and throws
// NumericalDivergence if any loss goes non-finite.
inline UpdateDiagnostics ppo_update(Batch& b, Agent& agent, PpoState& state,
                                    const UpdateConfig& cfg) {
  UpdateDiagnostics diag;
  diag.epsilon_used = state.epsilon;
  const NetParams policy_backup = agent.policy;
  const NetParams value_backup = agent.value;
  const PpoState state_backup = state;
  auto diverge = [&](const char* what) {
    agent.policy = policy_backup;
    agent.value = value_backup;
    state = state_backup;
    throw Error(ErrorCode::NumericalDivergence, what);
  };

  returns_and_advantages(b, agent.value, cfg.gamma1, cfg.gamma2,
                         cfg.normalize_advantages);
  if (!b.advantages.allFinite()) diverge("non-finite advantages");

  const Mat mean_old = forward(agent.policy, b.obs, b.policy_hidden0, b.unroll);
  const RowVec log_std_old = agent.policy.log_std;
  const double kl_limit = cfg.kl_stop_factor * cfg.kl_target;
  for (int epoch = 0; epoch < cfg.policy_epochs; ++epoch) {
    PolicyLoss pl = policy_loss(agent.policy, b, state.epsilon);
    if (!std::isfinite(pl.loss) || !pl.grad.all_finite()) {
      diverge("non-finite policy loss");
    }
    diag.clip_fraction = pl.clip_fraction;
    if (epoch == 0) {
      diag.policy_loss = pl.loss;
    } else {
      const double kl = mean_kl(mean_old, log_std_old, pl.mean,
                                agent.policy.log_std, b.mask);
      if (kl > kl_limit) break;
    }
    state.policy_opt.step(agent.policy, pl.grad);
    diag.policy_epochs = epoch + 1;
  }
  const Mat mean_new = forward(agent.policy, b.obs, b.policy_hidden0, b.unroll);
  diag.kl = mean_kl(mean_old, log_std_old, mean_new, agent.policy.log_std, b.mask);
  if (!std::isfinite(diag.kl)) diverge("non-finite KL");
  state.epsilon = adapt_clip(diag.kl, state.epsilon, cfg.kl_target);
  diag.epsilon = state.epsilon;

  diag.value_loss_before = value_loss(agent.value, b, false).loss;
  const Eigen::Index segments = b.segments();
  const Eigen::Index per_mb = std::max<Eigen::Index>(
      1, cfg.value_minibatch_rows / b.unroll);
  for (int epoch = 0; epoch < cfg.value_epochs; ++epoch) {
    for (Eigen::Index s0 = 0; s0 < segments; s0 += per_mb) {
      const Eigen::Index count = std::min(per_mb, segments - s0);
      const Batch mb = count == segments ? b : slice_segments(b, s0, count);
      if (mb.valid_count() <= 0.0) continue;
      ValueLoss vl = value_loss(agent.value, mb);
      if (!std::isfinite(vl.loss) || !vl.grad.all_finite()) {
        diverge("non-finite value loss");
      }
      state.value_opt.step(agent.value, vl.grad);
    }
  }
  diag.value_loss_after = value_loss(agent.value, b, false).loss;
  if (!std::isfinite(diag.value_loss_after)) diverge("non-finite value loss");
  return diag;
}

}  // namespace metaland
