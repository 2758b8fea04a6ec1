// Adam optimizer over NetParams, and a running observation normalizer.
#pragma once

#include <cmath>
#include <vector>

#include "metaland/nets.hpp"

namespace metaland {

class Adam {
 public:
  Adam() = default;
  Adam(const NetParams& like, double learning_rate, double beta1 = 0.9,
       double beta2 = 0.999, double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
    const auto n = like.parameter_count();
    m_.assign(static_cast<std::size_t>(n), 0.0);
    v_.assign(static_cast<std::size_t>(n), 0.0);
  }

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  long long steps() const { return t_; }

  // Gradient descent step: params -= lr * mhat / (sqrt(vhat) + eps).
  void step(NetParams& params, const NetParams& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, double(t_));
    const double c2 = 1.0 - std::pow(beta2_, double(t_));
    auto pt = params.tensors();
    const auto gt = grad.tensors();
    std::size_t k = 0;
    for (std::size_t j = 0; j < pt.size(); ++j) {
      for (Eigen::Index i = 0; i < pt[j].size(); ++i, ++k) {
        const double gi = gt[j].data[i];
        m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * gi;
        v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * gi * gi;
        pt[j].data[i] -= lr_ * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + eps_);
      }
    }
  }

 private:
  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long long t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

// Running mean/variance over every observation seen so far (parallel
// Welford merge per batch). Frozen while a batch is collected and trained.
class ObsScaler {
 public:
  ObsScaler() = default;
  explicit ObsScaler(int dim)
      : mean_(Eigen::VectorXd::Zero(dim)),
        m2_(Eigen::VectorXd::Zero(dim)) {}

  int dim() const { return static_cast<int>(mean_.size()); }
  double count() const { return count_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& m2() const { return m2_; }

  void set_state(const Eigen::VectorXd& mean, const Eigen::VectorXd& m2,
                 double count) {
    mean_ = mean;
    m2_ = m2;
    count_ = count;
  }

  Eigen::VectorXd std_dev() const {
    Eigen::VectorXd s(mean_.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      const double var = count_ > 1.0 ? m2_[i] / count_ : 1.0;
      s[i] = std::max(std::sqrt(var), 1e-6);
    }
    return s;
  }

  void update(const Mat& batch) {
    if (batch.rows() == 0) return;
    const double n = static_cast<double>(batch.rows());
    const Eigen::VectorXd bmean = batch.colwise().mean().transpose();
    Eigen::VectorXd bm2(mean_.size());
    for (Eigen::Index j = 0; j < batch.cols(); ++j) {
      bm2[j] = (batch.col(j).array() - bmean[j]).square().sum();
    }
    const double total = count_ + n;
    const Eigen::VectorXd delta = bmean - mean_;
    mean_ += delta * (n / total);
    m2_ += bm2 + delta.cwiseProduct(delta) * (count_ * n / total);
    count_ = total;
  }

  // Identity until the first update.
  RowVec apply(const Eigen::Ref<const Eigen::VectorXd>& obs) const {
    if (count_ <= 1.0) return obs.transpose();
    const Eigen::VectorXd s = std_dev();
    RowVec out(obs.size());
    for (Eigen::Index i = 0; i < obs.size(); ++i) {
      out[i] = std::clamp((obs[i] - mean_[i]) / s[i], -10.0, 10.0);
    }
    return out;
  }

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd m2_;
  double count_ = 0.0;
};

}  // namespace metaland
