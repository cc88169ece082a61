#pragma once

#include <cmath>
#include <vector>

#include "vitts/diffusion.hpp"

namespace vitts::testing {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

// Independent 1-D oracle for the diffusion posterior: evaluates
//   q(x_{t-1} | x_t, x0) ~ q(x_t | x_{t-1}) q(x_{t-1} | x0)
// on a dense grid and integrates the first two moments numerically.
inline Moments quadrature_posterior(double x0, double x_t, int t,
                                    const DiffusionSchedule& s, int points = 40001) {
  const double ab_prev = s.alpha_bar_prev(t);
  const double b = s.beta(t);
  const double prior_mean = std::sqrt(ab_prev) * x0;
  const double prior_var = 1.0 - ab_prev;
  const double a = std::sqrt(1.0 - b);  // x_t ~ N(a x_{t-1}, b)
  const double lik_center = x_t / a;
  const double lik_var = b / (a * a);

  const double sigma = std::sqrt(std::max(prior_var, lik_var));
  const double lo = std::min(prior_mean, lik_center) - 12.0 * sigma;
  const double hi = std::max(prior_mean, lik_center) + 12.0 * sigma;
  const double dx = (hi - lo) / double(points - 1);

  std::vector<double> logw(static_cast<size_t>(points));
  double max_logw = -1e300;
  for (int i = 0; i < points; ++i) {
    const double x = lo + dx * i;
    const double log_prior = -0.5 * (x - prior_mean) * (x - prior_mean) / prior_var;
    const double log_lik = -0.5 * (x_t - a * x) * (x_t - a * x) / b;
    logw[size_t(i)] = log_prior + log_lik;
    max_logw = std::max(max_logw, logw[size_t(i)]);
  }
  double w_sum = 0.0, x_sum = 0.0, xx_sum = 0.0;
  for (int i = 0; i < points; ++i) {
    const double x = lo + dx * i;
    const double w = std::exp(logw[size_t(i)] - max_logw);
    w_sum += w;
    x_sum += w * x;
    xx_sum += w * x * x;
  }
  Moments m;
  m.mean = x_sum / w_sum;
  m.var = xx_sum / w_sum - m.mean * m.mean;
  return m;
}

// Samples x_t by iterating the per-step Markov chain from x0 (the
// step-by-step alternative to the closed-form marginal).
inline double chain_sample(double x0, int t, const DiffusionSchedule& s, Rng& rng) {
  double x = x0;
  for (int i = 1; i <= t; ++i)
    x = std::sqrt(1.0 - s.beta(i)) * x + std::sqrt(s.beta(i)) * rng.gaussian();
  return x;
}

inline Moments sample_moments(const std::vector<double>& xs) {
  Moments m;
  for (double x : xs) m.mean += x;
  m.mean /= double(xs.size());
  for (double x : xs) m.var += (x - m.mean) * (x - m.mean);
  m.var /= double(xs.size() - 1);
  return m;
}

}  // namespace vitts::testing
