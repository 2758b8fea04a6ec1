// Helpers shared by the unit suites and the acceptance runner: random
// batches, central finite differences and a plain per-step reference
// forward pass.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "metaland/nets.hpp"
#include "metaland/ppo.hpp"
#include "metaland/rollout.hpp"

namespace metaland::testing {

inline LayerSpec small_spec(int in, int out, bool recurrent, int h2 = 8) {
  LayerSpec s;
  s.input_dim = in;
  s.h1 = 7;
  s.h2 = h2;
  s.h3 = 6;
  s.output_dim = out;
  s.recurrent = recurrent;
  return s;
}

// Random small net with nonzero biases so every parameter matters.
inline NetParams random_net(const LayerSpec& spec, Rng& rng, bool with_log_std) {
  NetParams p = init_params(spec, rng, with_log_std, 0.7, 1.0);
  for (TensorView& t : p.tensors()) {
    if (t.name.find(".b") != std::string::npos || t.name == "log_std") {
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data[i] = rng.uniform(-0.5, 0.5);
    }
  }
  return p;
}

inline Mat random_mat(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

// Padded batch with `segments` segments of length `unroll`; the last rows of
// some segments are filler. log_prob_old is offset from the current policy's
// log-probability so that some ratios fall outside the clip range.
inline Batch random_batch(const NetParams& policy, const NetParams& value,
                          int segments, int unroll, Rng& rng) {
  Batch b;
  b.unroll = unroll;
  const int rows = segments * unroll;
  const int obs = policy.spec.input_dim;
  const int act = policy.spec.output_dim;
  b.obs = random_mat(rows, obs, rng);
  b.actions = random_mat(rows, act, rng, 0.8);
  b.mask = Eigen::VectorXd::Ones(rows);
  for (int s = 0; s < segments; ++s) {
    if (unroll > 1 && s % 2 == 1) {
      const int pad = 1 + s % (unroll - 1);
      for (int k = unroll - pad; k < unroll; ++k) b.mask[s * unroll + k] = 0.0;
    }
  }
  b.policy_hidden0 = random_mat(segments, policy.spec.h2, rng, 0.5);
  b.value_hidden0 = random_mat(segments, value.spec.h2, rng, 0.5);
  const Mat mean = forward(policy, b.obs, b.policy_hidden0, unroll);
  b.log_prob_old.resize(rows);
  for (int i = 0; i < rows; ++i) {
    b.log_prob_old[i] = log_prob(mean.row(i), policy.log_std, b.actions.row(i)) +
                        rng.uniform(-0.4, 0.4);
  }
  b.r1 = Eigen::VectorXd::Zero(rows);
  b.r2 = Eigen::VectorXd::Zero(rows);
  b.advantages.resize(rows);
  b.returns.resize(rows);
  for (int i = 0; i < rows; ++i) {
    b.advantages[i] = b.mask[i] * rng.normal();
    b.returns[i] = rng.normal();
  }
  b.episode_start.clear();
  b.episode_length.clear();
  return b;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;
  int checked = 0;
};

// Compares `analytic` with central differences of `loss` on every scalar of
// `params`. Relative error |g - fd| / max(|g|, |fd|, floor).
inline GradCheck check_gradient(NetParams& params, const NetParams& analytic,
                                const std::function<double()>& loss,
                                double step = 1e-5, double floor = 1e-7) {
  GradCheck out;
  auto ps = params.tensors();
  const auto gs = analytic.tensors();
  for (std::size_t t = 0; t < ps.size(); ++t) {
    for (Eigen::Index i = 0; i < ps[t].size(); ++i) {
      double& x = ps[t].data[i];
      const double x0 = x;
      x = x0 + step;
      const double up = loss();
      x = x0 - step;
      const double down = loss();
      x = x0;
      const double fd = (up - down) / (2.0 * step);
      const double g = gs[t].data[i];
      const double rel =
          std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), floor});
      ++out.checked;
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst = ps[t].name + "[" + std::to_string(i) + "] analytic " +
                    std::to_string(g) + " fd " + std::to_string(fd);
      }
    }
  }
  return out;
}

// Step-by-step reference: one gru_step per row, dense layers applied one row
// at a time.
inline Mat sequential_forward(const NetParams& p, const Mat& x, RowVec hidden) {
  Mat out(x.rows(), p.spec.output_dim);
  auto dense = [](const RowVec& in, const Dense& d) {
    return RowVec((in * d.w + d.b).array().tanh().matrix());
  };
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const RowVec a1 = dense(x.row(i), p.l1);
    RowVec a2;
    if (p.spec.recurrent) {
      hidden = gru_step(p.gru, hidden, a1);
      a2 = hidden;
    } else {
      a2 = dense(a1, p.l2);
    }
    const RowVec a3 = dense(a2, p.l3);
    out.row(i) = a3 * p.l4.w + p.l4.b;
  }
  return out;
}

// Worst absolute gap between the batched segment forward (hidden states
// recorded by a sequential pass injected at every segment start) and the
// sequential reference, over `episodes` random episodes.
inline double unroll_equivalence_gap(const NetParams& p, int unroll, int episodes,
                                     Rng& rng) {
  double worst = 0.0;
  for (int e = 0; e < episodes; ++e) {
    const int len = 1 + static_cast<int>(rng.uniform() * 60.0);
    const Mat x = random_mat(len, p.spec.input_dim, rng);
    const RowVec h0 = RowVec::Zero(p.spec.h2);
    const Mat ref = sequential_forward(p, x, h0);

    // Hidden state entering each step, from an independent per-step pass.
    Mat entering(len, p.spec.h2);
    RowVec h = h0;
    for (int i = 0; i < len; ++i) {
      entering.row(i) = h;
      Mat xi = x.row(i);
      Mat hi = h;
      step_forward(p, xi, hi);
      h = hi.row(0);
    }

    const int padded = padded_length(len, unroll);
    Mat xp = Mat::Zero(padded, x.cols());
    xp.topRows(len) = x;
    const int segs = padded / unroll;
    Mat seed(segs, p.spec.h2);
    for (int s = 0; s < segs; ++s) seed.row(s) = entering.row(s * unroll);
    const Mat out = forward(p, xp, seed, unroll);
    worst = std::max(worst, (out.topRows(len) - ref).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace metaland::testing
