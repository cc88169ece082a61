#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "vitts/autograd.hpp"
#include "vitts/tensor.hpp"

namespace vitts {

// Linear-beta DDPM schedule with precomputed forward marginals and
// posterior coefficients. All step indices are 1-based, t in [1, T].
struct DiffusionSchedule {
  int T = 0;
  double beta_start = 0.0;
  double beta_end = 0.0;
  std::vector<double> betas;
  std::vector<double> alpha_bars;
  std::vector<double> post_coef_x0;  // coefficient of x0 in the posterior mean
  std::vector<double> post_coef_xt;  // coefficient of x_t in the posterior mean
  std::vector<double> post_vars;

  double beta(int t) const { return betas[size_t(t) - 1]; }
  double alpha_bar(int t) const { return alpha_bars[size_t(t) - 1]; }
  double alpha_bar_prev(int t) const { return t >= 2 ? alpha_bars[size_t(t) - 2] : 1.0; }
  double posterior_var(int t) const { return post_vars[size_t(t) - 1]; }
  void check_step(int t) const;
};

DiffusionSchedule make_schedule(int T, double beta_start, double beta_end);

// JSON record {T, beta_start, beta_end}; derived arrays are recomputed on load.
std::string schedule_to_json(const DiffusionSchedule& s);
DiffusionSchedule schedule_from_json(const std::string& text);

struct NoisyMel {
  Tensor data;
  int t = 0;
};

// Closed-form forward marginal: sqrt(abar_t) x0 + sqrt(1 - abar_t) noise.
NoisyMel q_sample(const Tensor& x0, int t, const Tensor& noise,
                  const DiffusionSchedule& sched);

// Posterior q(x_{t-1} | x_t, x0): mean and (scalar, isotropic) variance.
// t = 1 degenerates to (x0, 0) via the abar_0 = 1 convention.
std::pair<Tensor, double> posterior_params(const Tensor& x0, const Tensor& x_t, int t,
                                           const DiffusionSchedule& sched);

// A denoiser maps (x_t, t, cond) to a noise prediction of the same shape.
// cond may be null for unconditional models.
using DenoiserFn = std::function<ag::Var(const ag::Var& x_t, int t, const ag::Var* cond)>;

// One training term: MSE between predicted and true noise, mean over elements.
ag::Var training_step_loss(const DenoiserFn& denoiser, const Tensor& x0,
                           const ag::Var* cond, int t, const Tensor& noise,
                           const DiffusionSchedule& sched);

// Ancestral sampling (reverse chain, z = 0 at the final step). Deterministic
// for a fixed seed. Runs the denoiser in no-grad mode.
Tensor ancestral_sample(const DenoiserFn& denoiser, const ag::Var* cond,
                        const DiffusionSchedule& sched, int frames, int bins,
                        uint64_t seed);

}  // namespace vitts
