#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "vitts/nn.hpp"

namespace vitts {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int warmup_steps = 100;  // linear warmup from zero
};

// Adaptive-moment optimizer over a ParamList. Gradients arrive by slot
// (summed over the batch by the caller's GradSink); empty slots are zero.
class Adam {
 public:
  Adam(nn::ParamList* params, AdamConfig cfg = {}) : params_(params), cfg_(cfg) {
    m_.resize(params->vars.size());
    v_.resize(params->vars.size());
    for (size_t i = 0; i < params->vars.size(); ++i) {
      const auto& t = params->vars[i]->val;
      m_[i] = Tensor(t.rows(), t.cols());
      v_[i] = Tensor(t.rows(), t.cols());
    }
  }

  void step(const std::vector<Tensor>& grads, double grad_scale = 1.0) {
    if (grads.size() != params_->vars.size())
      throw std::invalid_argument("Adam::step: slot count mismatch");
    ++t_;
    const double warm =
        cfg_.warmup_steps > 0 ? std::min(1.0, double(t_) / cfg_.warmup_steps) : 1.0;
    const double lr = cfg_.lr * warm;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (size_t i = 0; i < params_->vars.size(); ++i) {
      auto& p = params_->vars[i];
      if (!p->needs_grad) continue;
      if (grads[i].size() == 0) continue;
      Tensor& m = m_[i];
      Tensor& v = v_[i];
      for (size_t k = 0; k < p->val.size(); ++k) {
        const double g = grads[i].at(k) * grad_scale;
        m.at(k) = cfg_.beta1 * m.at(k) + (1.0 - cfg_.beta1) * g;
        v.at(k) = cfg_.beta2 * v.at(k) + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m.at(k) / bc1;
        const double vhat = v.at(k) / bc2;
        p->val.at(k) -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

  int64_t steps_taken() const { return t_; }

  // optimizer state participates in resumable checkpoints
  std::vector<Tensor>& moment1() { return m_; }
  std::vector<Tensor>& moment2() { return v_; }
  void set_steps_taken(int64_t t) { t_ = t; }

 private:
  nn::ParamList* params_;
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  int64_t t_ = 0;
};

}  // namespace vitts
