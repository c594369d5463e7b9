#ifndef STARGAN_OPTIMIZER_HPP_
#define STARGAN_OPTIMIZER_HPP_

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "stargan/autodiff.hpp"

namespace stargan {

// Adam over a fixed parameter list. Each network owns its own instance;
// moments persist across the whole run and are checkpointed.
class Adam {
 public:
  Adam(std::vector<ad::Var> params, double beta1, double beta2, double eps = 1e-8)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
      m_.emplace_back(Tensor::zeros(p->value.shape()));
      v_.emplace_back(Tensor::zeros(p->value.shape()));
    }
  }

  const std::vector<ad::Var>& params() const { return params_; }
  int64_t t() const { return t_; }

  void step(const std::vector<ad::Var>& grads, double lr) {
    if (grads.size() != params_.size())
      throw std::invalid_argument("Adam::step: gradient count mismatch");
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < params_.size(); ++i) {
      Tensor& p = params_[i]->value;
      const Tensor& g = grads[i]->value;
      if (!p.same_shape(g)) throw std::invalid_argument("Adam::step: gradient shape mismatch");
      for (int64_t j = 0; j < p.numel(); ++j) {
        m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g[j];
        v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g[j] * g[j];
        p[j] -= lr * (m_[i][j] / bc1) / (std::sqrt(v_[i][j] / bc2) + eps_);
      }
    }
  }

  void save(std::ostream& out) const {
    out.write(reinterpret_cast<const char*>(&t_), sizeof(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
      out.write(reinterpret_cast<const char*>(m_[i].data()), m_[i].numel() * sizeof(double));
      out.write(reinterpret_cast<const char*>(v_[i].data()), v_[i].numel() * sizeof(double));
    }
  }

  void load(std::istream& in) {
    in.read(reinterpret_cast<char*>(&t_), sizeof(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
      in.read(reinterpret_cast<char*>(m_[i].data()), m_[i].numel() * sizeof(double));
      in.read(reinterpret_cast<char*>(v_[i].data()), v_[i].numel() * sizeof(double));
    }
    if (!in) throw std::runtime_error("Adam::load: truncated stream");
  }

 private:
  std::vector<ad::Var> params_;
  std::vector<Tensor> m_, v_;
  double beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

}  // namespace stargan

#endif  // STARGAN_OPTIMIZER_HPP_
