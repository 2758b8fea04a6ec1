// Four-layer policy/value networks with an optional GRU second layer.
//
// Layer 1 is dense tanh, layer 2 is either dense tanh or a GRU, layer 3 is
// dense tanh and layer 4 is linear. The batched forward pass unrolls the GRU
// over segments of T consecutive rows: rows s*T .. s*T+T-1 form segment s,
// whose recurrence is seeded with the hidden state recorded for its first
// row. Gradients are computed by hand, through every unrolled step.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "metaland/core.hpp"

namespace metaland {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::RowVectorXd;

struct LayerSpec {
  int input_dim = 1;
  int h1 = 1;
  int h2 = 1;
  int h3 = 1;
  int output_dim = 1;
  bool recurrent = false;

  // Hidden sizes 10*obs_dim, round(sqrt(h1*h3)), 10*act_dim (policy) or 5
  // (value).
  static LayerSpec policy(int obs_dim, int act_dim, bool recurrent) {
    LayerSpec s;
    s.input_dim = obs_dim;
    s.h1 = 10 * obs_dim;
    s.h3 = 10 * act_dim;
    s.h2 = static_cast<int>(std::lround(std::sqrt(double(s.h1) * s.h3)));
    s.output_dim = act_dim;
    s.recurrent = recurrent;
    return s;
  }

  static LayerSpec value(int obs_dim, bool recurrent) {
    LayerSpec s;
    s.input_dim = obs_dim;
    s.h1 = 10 * obs_dim;
    s.h3 = 5;
    s.h2 = static_cast<int>(std::lround(std::sqrt(double(s.h1) * s.h3)));
    s.output_dim = 1;
    s.recurrent = recurrent;
    return s;
  }

  bool operator==(const LayerSpec&) const = default;
};

struct Dense {
  Mat w;     // in x out
  RowVec b;  // out
};

struct GruWeights {
  Mat wz, wr, wh;  // in x h
  Mat uz, ur, uh;  // h x h
  RowVec bz, br, bh;
};

// One contiguous parameter block, used for flat iteration (optimizer state,
// finite differences, checkpoints).
struct TensorView {
  std::string name;
  double* data;
  Eigen::Index rows;
  Eigen::Index cols;
  Eigen::Index size() const { return rows * cols; }
};

struct NetParams {
  LayerSpec spec;
  Dense l1;
  Dense l2;  // dense middle layer (non-recurrent nets)
  GruWeights gru;  // recurrent middle layer
  Dense l3;
  Dense l4;
  RowVec log_std;  // policy exploration, empty for value nets

  static NetParams zeros(const LayerSpec& spec, bool with_log_std) {
    NetParams p;
    p.spec = spec;
    auto dense = [](int in, int out) {
      return Dense{Mat::Zero(in, out), RowVec::Zero(out)};
    };
    p.l1 = dense(spec.input_dim, spec.h1);
    if (spec.recurrent) {
      const int h = spec.h2;
      p.gru.wz = Mat::Zero(spec.h1, h);
      p.gru.wr = Mat::Zero(spec.h1, h);
      p.gru.wh = Mat::Zero(spec.h1, h);
      p.gru.uz = Mat::Zero(h, h);
      p.gru.ur = Mat::Zero(h, h);
      p.gru.uh = Mat::Zero(h, h);
      p.gru.bz = RowVec::Zero(h);
      p.gru.br = RowVec::Zero(h);
      p.gru.bh = RowVec::Zero(h);
    } else {
      p.l2 = dense(spec.h1, spec.h2);
    }
    p.l3 = dense(spec.h2, spec.h3);
    p.l4 = dense(spec.h3, spec.output_dim);
    if (with_log_std) p.log_std = RowVec::Zero(spec.output_dim);
    return p;
  }

  NetParams zeros_like() const {
    return zeros(spec, log_std.size() > 0);
  }

  bool has_log_std() const { return log_std.size() > 0; }

  std::vector<TensorView> tensors() {
    std::vector<TensorView> out;
    auto add = [&out](const std::string& name, auto& m) {
      out.push_back({name, m.data(), m.rows(), m.cols()});
    };
    add("l1.w", l1.w);
    add("l1.b", l1.b);
    if (spec.recurrent) {
      add("gru.wz", gru.wz);
      add("gru.wr", gru.wr);
      add("gru.wh", gru.wh);
      add("gru.uz", gru.uz);
      add("gru.ur", gru.ur);
      add("gru.uh", gru.uh);
      add("gru.bz", gru.bz);
      add("gru.br", gru.br);
      add("gru.bh", gru.bh);
    } else {
      add("l2.w", l2.w);
      add("l2.b", l2.b);
    }
    add("l3.w", l3.w);
    add("l3.b", l3.b);
    add("l4.w", l4.w);
    add("l4.b", l4.b);
    if (has_log_std()) add("log_std", log_std);
    return out;
  }

  std::vector<TensorView> tensors() const {
    return const_cast<NetParams*>(this)->tensors();
  }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& t : tensors()) n += t.size();
    return n;
  }

  bool all_finite() const {
    for (const auto& t : tensors()) {
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        if (!std::isfinite(t.data[i])) return false;
      }
    }
    return true;
  }
};

// Glorot-uniform weights U(+-sqrt(6/(fan_in+fan_out))), zero biases,
// log_std = ln(initial_std). `output_gain` scales the last layer.
inline NetParams init_params(const LayerSpec& spec, Rng& rng, bool with_log_std,
                             double initial_std = 0.6,
                             double output_gain = 1.0) {
  NetParams p = NetParams::zeros(spec, with_log_std);
  auto fill = [&rng](Mat& w, double gain) {
    const double limit = gain * std::sqrt(6.0 / double(w.rows() + w.cols()));
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w.data()[i] = rng.uniform(-limit, limit);
    }
  };
  fill(p.l1.w, 1.0);
  if (spec.recurrent) {
    fill(p.gru.wz, 1.0);
    fill(p.gru.wr, 1.0);
    fill(p.gru.wh, 1.0);
    fill(p.gru.uz, 1.0);
    fill(p.gru.ur, 1.0);
    fill(p.gru.uh, 1.0);
  } else {
    fill(p.l2.w, 1.0);
  }
  fill(p.l3.w, 1.0);
  fill(p.l4.w, output_gain);
  if (with_log_std) p.log_std.setConstant(std::log(initial_std));
  return p;
}

// ---------------------------------------------------------------------------
// GRU cell

namespace detail {

template <class Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

}  // namespace detail

// z = s(x Wz + h Uz + bz), r = s(x Wr + h Ur + br),
// c = tanh(x Wh + (r*h) Uh + bh), h' = (1-z)*h + z*c. Row vectors.
inline RowVec gru_step(const GruWeights& g, const RowVec& h, const RowVec& x) {
  const RowVec z = detail::sigmoid(x * g.wz + h * g.uz + g.bz);
  const RowVec r = detail::sigmoid(x * g.wr + h * g.ur + g.br);
  const RowVec rh = r.cwiseProduct(h);
  const RowVec c = (x * g.wh + rh * g.uh + g.bh).array().tanh().matrix();
  return (1.0 - z.array()).matrix().cwiseProduct(h) + z.cwiseProduct(c);
}

// ---------------------------------------------------------------------------
// forward / backward

struct ForwardCache {
  int unroll = 1;
  Mat x;   // m x in
  Mat a1;  // m x h1
  Mat a2;  // m x h2: GRU hidden output or dense tanh output
  Mat z, r, c, h_prev;  // GRU internals, m x h2
  Mat a3;  // m x h3
  Mat out;  // m x out
};

namespace detail {

using StridedMap = Eigen::Map<Mat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const Mat, 0, Eigen::OuterStride<>>;

// Rows k, k+T, k+2T, ... of a row-major matrix.
inline StridedMap step_rows(Mat& m, int k, int unroll) {
  const Eigen::Index cols = m.cols();
  return StridedMap(m.data() + k * cols, m.rows() / unroll, cols,
                    Eigen::OuterStride<>(unroll * cols));
}

inline ConstStridedMap step_rows(const Mat& m, int k, int unroll) {
  const Eigen::Index cols = m.cols();
  return ConstStridedMap(m.data() + k * cols, m.rows() / unroll, cols,
                         Eigen::OuterStride<>(unroll * cols));
}

inline Mat dense_tanh(const Mat& x, const Dense& d) {
  Mat y = x * d.w;
  y.rowwise() += d.b;
  return y.array().tanh().matrix();
}

}  // namespace detail

// Batched forward pass. `x` holds m rows ordered as consecutive segments of
// `unroll` rows; `hidden0` holds one seed hidden state per segment (ignored
// for non-recurrent nets). Returns m x output_dim.
inline Mat forward(const NetParams& p, const Mat& x, const Mat& hidden0,
                   int unroll, ForwardCache* cache = nullptr) {
  const LayerSpec& s = p.spec;
  if (unroll < 1 || x.rows() % unroll != 0) {
    throw Error(ErrorCode::ShapeError,
                "forward: batch rows must be a multiple of the unroll length");
  }
  if (x.cols() != s.input_dim) {
    throw Error(ErrorCode::ShapeError, "forward: input width mismatch");
  }
  const Eigen::Index m = x.rows();
  const Eigen::Index segments = m / unroll;

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.unroll = unroll;
  c.x = x;
  c.a1 = detail::dense_tanh(x, p.l1);

  if (s.recurrent) {
    if (hidden0.rows() != segments || hidden0.cols() != s.h2) {
      throw Error(ErrorCode::ShapeError, "forward: hidden seed shape mismatch");
    }
    const GruWeights& g = p.gru;
    Mat xz = c.a1 * g.wz;
    xz.rowwise() += g.bz;
    Mat xr = c.a1 * g.wr;
    xr.rowwise() += g.br;
    Mat xh = c.a1 * g.wh;
    xh.rowwise() += g.bh;
    c.z.resize(m, s.h2);
    c.r.resize(m, s.h2);
    c.c.resize(m, s.h2);
    c.h_prev.resize(m, s.h2);
    c.a2.resize(m, s.h2);
    Mat h = hidden0;
    Mat z, r, cand, rh;
    for (int k = 0; k < unroll; ++k) {
      detail::step_rows(c.h_prev, k, unroll) = h;
      z = detail::sigmoid(detail::step_rows(xz, k, unroll) + h * g.uz);
      r = detail::sigmoid(detail::step_rows(xr, k, unroll) + h * g.ur);
      rh = r.cwiseProduct(h);
      cand = (detail::step_rows(xh, k, unroll) + rh * g.uh).array().tanh().matrix();
      h = (1.0 - z.array()).matrix().cwiseProduct(h) + z.cwiseProduct(cand);
      detail::step_rows(c.z, k, unroll) = z;
      detail::step_rows(c.r, k, unroll) = r;
      detail::step_rows(c.c, k, unroll) = cand;
      detail::step_rows(c.a2, k, unroll) = h;
    }
  } else {
    c.a2 = detail::dense_tanh(c.a1, p.l2);
  }
  c.a3 = detail::dense_tanh(c.a2, p.l3);
  c.out = c.a3 * p.l4.w;
  c.out.rowwise() += p.l4.b;
  return c.out;
}

// Reverse pass for d(loss)/d(out). log_std gradients are left at zero (the
// loss owns that term).
inline NetParams backward(const NetParams& p, const ForwardCache& c,
                          const Mat& d_out) {
  const LayerSpec& s = p.spec;
  NetParams g = p.zeros_like();
  const int unroll = c.unroll;

  g.l4.w.noalias() = c.a3.transpose() * d_out;
  g.l4.b = d_out.colwise().sum();
  Mat d_pre3 = (d_out * p.l4.w.transpose()).cwiseProduct(
      (1.0 - c.a3.array().square()).matrix());
  g.l3.w.noalias() = c.a2.transpose() * d_pre3;
  g.l3.b = d_pre3.colwise().sum();
  Mat d_a2 = d_pre3 * p.l3.w.transpose();

  Mat d_a1;
  if (s.recurrent) {
    const GruWeights& w = p.gru;
    const Eigen::Index m = c.a1.rows();
    Mat d_az(m, s.h2), d_ar(m, s.h2), d_ah(m, s.h2);
    Mat d_next = Mat::Zero(m / unroll, s.h2);
    Mat d_h, d_z, d_c, d_prev, ah, d_rh, d_r, az, ar, rh;
    for (int k = unroll - 1; k >= 0; --k) {
      const auto z = detail::step_rows(c.z, k, unroll);
      const auto r = detail::step_rows(c.r, k, unroll);
      const auto cand = detail::step_rows(c.c, k, unroll);
      const auto hp = detail::step_rows(c.h_prev, k, unroll);
      d_h = detail::step_rows(d_a2, k, unroll) + d_next;
      d_z = d_h.cwiseProduct(cand - hp);
      d_c = d_h.cwiseProduct(z);
      d_prev = d_h.cwiseProduct((1.0 - z.array()).matrix());
      ah = d_c.cwiseProduct((1.0 - cand.array().square()).matrix());
      rh = r.cwiseProduct(hp);
      g.gru.uh.noalias() += rh.transpose() * ah;
      d_rh = ah * w.uh.transpose();
      d_r = d_rh.cwiseProduct(hp);
      d_prev += d_rh.cwiseProduct(r);
      az = d_z.cwiseProduct(z.cwiseProduct((1.0 - z.array()).matrix()));
      ar = d_r.cwiseProduct(r.cwiseProduct((1.0 - r.array()).matrix()));
      g.gru.uz.noalias() += hp.transpose() * az;
      g.gru.ur.noalias() += hp.transpose() * ar;
      d_prev.noalias() += az * w.uz.transpose();
      d_prev.noalias() += ar * w.ur.transpose();
      detail::step_rows(d_az, k, unroll) = az;
      detail::step_rows(d_ar, k, unroll) = ar;
      detail::step_rows(d_ah, k, unroll) = ah;
      d_next = d_prev;
    }
    g.gru.wz.noalias() = c.a1.transpose() * d_az;
    g.gru.wr.noalias() = c.a1.transpose() * d_ar;
    g.gru.wh.noalias() = c.a1.transpose() * d_ah;
    g.gru.bz = d_az.colwise().sum();
    g.gru.br = d_ar.colwise().sum();
    g.gru.bh = d_ah.colwise().sum();
    d_a1 = d_az * w.wz.transpose();
    d_a1.noalias() += d_ar * w.wr.transpose();
    d_a1.noalias() += d_ah * w.wh.transpose();
  } else {
    Mat d_pre2 = d_a2.cwiseProduct((1.0 - c.a2.array().square()).matrix());
    g.l2.w.noalias() = c.a1.transpose() * d_pre2;
    g.l2.b = d_pre2.colwise().sum();
    d_a1 = d_pre2 * p.l2.w.transpose();
  }
  Mat d_pre1 = d_a1.cwiseProduct((1.0 - c.a1.array().square()).matrix());
  g.l1.w.noalias() = c.x.transpose() * d_pre1;
  g.l1.b = d_pre1.colwise().sum();
  return g;
}

// Single-step inference for a batch of in-flight episodes: each row of `x`
// is one episode, `hidden` their current states (updated in place).
inline Mat step_forward(const NetParams& p, const Mat& x, Mat& hidden) {
  ForwardCache cache;
  Mat out = forward(p, x, hidden, 1, &cache);
  if (p.spec.recurrent) hidden = cache.a2;
  return out;
}

// ---------------------------------------------------------------------------
// diagonal Gaussian policy head

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

inline double log_prob(const Eigen::Ref<const RowVec>& mean,
                       const Eigen::Ref<const RowVec>& log_std,
                       const Eigen::Ref<const RowVec>& action) {
  double lp = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double z = (action[i] - mean[i]) * std::exp(-log_std[i]);
    lp += -0.5 * z * z - log_std[i] - kLogSqrt2Pi;
  }
  return lp;
}

struct ActionSample {
  RowVec action;
  double log_prob = 0.0;
};

inline ActionSample sample_action(const Eigen::Ref<const RowVec>& mean,
                                  const Eigen::Ref<const RowVec>& log_std,
                                  Rng& rng) {
  ActionSample s;
  s.action.resize(mean.size());
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    s.action[i] = mean[i] + std::exp(log_std[i]) * rng.normal();
  }
  s.log_prob = log_prob(mean, log_std, s.action);
  return s;
}

// KL(old || new) between diagonal Gaussians.
inline double gaussian_kl(const Eigen::Ref<const RowVec>& mean_old,
                          const Eigen::Ref<const RowVec>& log_std_old,
                          const Eigen::Ref<const RowVec>& mean_new,
                          const Eigen::Ref<const RowVec>& log_std_new) {
  double kl = 0.0;
  for (Eigen::Index i = 0; i < mean_old.size(); ++i) {
    const double var_old = std::exp(2.0 * log_std_old[i]);
    const double var_new = std::exp(2.0 * log_std_new[i]);
    const double dm = mean_old[i] - mean_new[i];
    kl += log_std_new[i] - log_std_old[i] + (var_old + dm * dm) / (2.0 * var_new) - 0.5;
  }
  return kl;
}

}  // namespace metaland
