#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "amdiff/core/error.hpp"

namespace amdiff::diffusion {

enum class ScheduleKind { Linear, Cosine };

inline ScheduleKind parse_schedule_kind(const std::string& s) {
  if (s == "linear") return ScheduleKind::Linear;
  if (s == "cosine") return ScheduleKind::Cosine;
  throw ConfigError("unknown schedule kind '" + s + "'");
}

// Tables are indexed by t in [0, T]; entry 0 is the clean state
// (beta 0, alpha_bar 1).
struct DiffusionSchedule {
  std::size_t T = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
  // 1 - alpha_bar from (1 - ab_t) = a_t (1 - ab_{t-1}) + b_t, which keeps
  // t = 1 exact (it equals beta_1).
  std::vector<double> one_minus_alpha_bar;
  std::vector<double> posterior_var;  // beta tilde

  double sigma2(std::size_t t) const { return beta[t]; }

  void check_step(std::size_t t) const {
    if (t < 1 || t > T) throw DomainError("time step " + std::to_string(t) + " outside [1, " + std::to_string(T) + "]");
  }

  // Whether q(x_T | x_0) is close to the prior.
  bool terminal_converged() const { return alpha_bar[T] < 1e-3; }
};

inline DiffusionSchedule schedule_from_betas(const std::vector<double>& betas) {
  if (betas.empty()) throw DomainError("schedule needs T >= 1");
  DiffusionSchedule s;
  s.T = betas.size();
  s.beta.assign(1, 0.0);
  s.beta.insert(s.beta.end(), betas.begin(), betas.end());
  s.alpha.assign(s.T + 1, 1.0);
  s.alpha_bar.assign(s.T + 1, 1.0);
  s.one_minus_alpha_bar.assign(s.T + 1, 0.0);
  s.posterior_var.assign(s.T + 1, 0.0);
  for (std::size_t t = 1; t <= s.T; ++t) {
    const double b = s.beta[t];
    if (!(b > 0.0 && b < 1.0)) throw DomainError("beta_" + std::to_string(t) + " = " + std::to_string(b) + " outside (0, 1)");
    if (t > 1 && b < s.beta[t - 1]) throw DomainError("beta schedule decreases at step " + std::to_string(t));
    s.alpha[t] = 1.0 - b;
    s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
    s.one_minus_alpha_bar[t] = s.alpha[t] * s.one_minus_alpha_bar[t - 1] + b;
    s.posterior_var[t] = s.one_minus_alpha_bar[t - 1] / s.one_minus_alpha_bar[t] * b;
  }
  return s;
}

// Linear: beta interpolated from beta_1 to beta_T. Cosine: alpha_bar follows
// cos^2 with offset 0.008 and betas are read off (capped at 0.999); beta_1 and
// beta_T are ignored. snr_shift k > 1 multiplies the cosine signal-to-noise
// ratio by k^2, spending more steps at low noise (useful when the data spread
// is small relative to the prior).
inline DiffusionSchedule make_schedule(std::size_t T, ScheduleKind kind = ScheduleKind::Linear, double beta_1 = 1e-4,
                                       double beta_T = 0.02, double snr_shift = 1.0) {
  if (T < 1) throw DomainError("schedule needs T >= 1");
  if (!(snr_shift > 0.0)) throw DomainError("snr_shift must be positive");
  std::vector<double> betas(T);
  if (kind == ScheduleKind::Linear) {
    for (std::size_t t = 0; t < T; ++t)
      betas[t] = T == 1 ? beta_1 : beta_1 + (beta_T - beta_1) * static_cast<double>(t) / static_cast<double>(T - 1);
  } else {
    const double off = 0.008;
    auto cos2 = [&](double t) {
      const double c = std::cos((t / static_cast<double>(T) + off) / (1.0 + off) * M_PI / 2.0);
      return c * c;
    };
    const double k2 = snr_shift * snr_shift;
    auto f = [&](double t) {
      const double a = cos2(t) / cos2(0.0);
      return k2 * a / (1.0 - a + k2 * a);
    };
    for (std::size_t t = 1; t <= T; ++t)
      betas[t - 1] = std::min(1.0 - f(static_cast<double>(t)) / f(static_cast<double>(t - 1)), 0.999);
  }
  return schedule_from_betas(betas);
}

}  // namespace amdiff::diffusion
