#include "vitts/diffusion.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "vitts/rng.hpp"

namespace vitts {

void DiffusionSchedule::check_step(int t) const {
  if (t < 1 || t > T)
    throw std::invalid_argument("diffusion step " + std::to_string(t) +
                                " out of range [1, " + std::to_string(T) + "]");
}

DiffusionSchedule make_schedule(int T, double beta_start, double beta_end) {
  if (T < 1) throw std::invalid_argument("make_schedule: T must be >= 1");
  if (!(beta_start > 0.0 && beta_start < 1.0) || !(beta_end > 0.0 && beta_end < 1.0))
    throw std::invalid_argument("make_schedule: betas must lie in (0, 1)");
  if (beta_start > beta_end)
    throw std::invalid_argument("make_schedule: beta_start > beta_end");

  DiffusionSchedule s;
  s.T = T;
  s.beta_start = beta_start;
  s.beta_end = beta_end;
  s.betas.resize(size_t(T));
  s.alpha_bars.resize(size_t(T));
  s.post_coef_x0.resize(size_t(T));
  s.post_coef_xt.resize(size_t(T));
  s.post_vars.resize(size_t(T));

  double abar = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double b =
        T == 1 ? beta_start
               : beta_start + double(t - 1) / double(T - 1) * (beta_end - beta_start);
    const double abar_prev = abar;
    abar *= 1.0 - b;
    s.betas[size_t(t) - 1] = b;
    s.alpha_bars[size_t(t) - 1] = abar;
    s.post_coef_x0[size_t(t) - 1] = std::sqrt(abar_prev) * b / (1.0 - abar);
    s.post_coef_xt[size_t(t) - 1] =
        std::sqrt(1.0 - b) * (1.0 - abar_prev) / (1.0 - abar);
    s.post_vars[size_t(t) - 1] = (1.0 - abar_prev) / (1.0 - abar) * b;
  }
  return s;
}

std::string schedule_to_json(const DiffusionSchedule& s) {
  nlohmann::json j{{"T", s.T}, {"beta_start", s.beta_start}, {"beta_end", s.beta_end}};
  return j.dump();
}

DiffusionSchedule schedule_from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  return make_schedule(j.at("T").get<int>(), j.at("beta_start").get<double>(),
                       j.at("beta_end").get<double>());
}

NoisyMel q_sample(const Tensor& x0, int t, const Tensor& noise,
                  const DiffusionSchedule& sched) {
  sched.check_step(t);
  check_same_shape(x0, noise, "q_sample");
  const double ab = sched.alpha_bar(t);
  NoisyMel out{Tensor(x0.rows(), x0.cols()), t};
  out.data.m() = std::sqrt(ab) * x0.m() + std::sqrt(1.0 - ab) * noise.m();
  return out;
}

std::pair<Tensor, double> posterior_params(const Tensor& x0, const Tensor& x_t, int t,
                                           const DiffusionSchedule& sched) {
  sched.check_step(t);
  check_same_shape(x0, x_t, "posterior_params");
  const double c0 = sched.post_coef_x0[size_t(t) - 1];
  const double c1 = sched.post_coef_xt[size_t(t) - 1];
  Tensor mean(x0.rows(), x0.cols());
  mean.m() = c0 * x0.m() + c1 * x_t.m();
  return {std::move(mean), sched.posterior_var(t)};
}

ag::Var training_step_loss(const DenoiserFn& denoiser, const Tensor& x0,
                           const ag::Var* cond, int t, const Tensor& noise,
                           const DiffusionSchedule& sched) {
  NoisyMel noisy = q_sample(x0, t, noise, sched);
  ag::Var x_t = ag::constant(std::move(noisy.data));
  ag::Var pred = denoiser(x_t, t, cond);
  if (!pred->val.same_shape(x0))
    throw std::invalid_argument("training_step_loss: denoiser output shape " +
                                pred->val.shape_str() + " != input shape " +
                                x0.shape_str());
  return ag::mse(pred, ag::constant(noise));
}

Tensor ancestral_sample(const DenoiserFn& denoiser, const ag::Var* cond,
                        const DiffusionSchedule& sched, int frames, int bins,
                        uint64_t seed) {
  if (frames < 1 || bins < 1)
    throw std::invalid_argument("ancestral_sample: shape must be positive");
  ag::NoGradGuard no_grad;
  Rng rng(seed);
  Tensor x = Tensor::randn(frames, bins, rng);
  for (int t = sched.T; t >= 1; --t) {
    const ag::Var pred = denoiser(ag::constant(x), t, cond);
    const double b = sched.beta(t);
    const double ab = sched.alpha_bar(t);
    x.m() = (x.m() - b / std::sqrt(1.0 - ab) * pred->val.m()) / std::sqrt(1.0 - b);
    if (t > 1) {
      const double sigma = std::sqrt(sched.posterior_var(t));
      for (size_t i = 0; i < x.size(); ++i) x.at(i) += sigma * rng.gaussian();
    }
  }
  return x;
}

}  // namespace vitts
