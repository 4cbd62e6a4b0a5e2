#pragma once

#include <cmath>

#include "amdiff/core/error.hpp"
#include "amdiff/core/types.hpp"
#include "amdiff/diffusion/schedule.hpp"

namespace amdiff::diffusion {

inline CoordMatrix q_sample_pos(const DiffusionSchedule& s, const CoordMatrix& x0, std::size_t t, const CoordMatrix& eps) {
  s.check_step(t);
  if (x0.rows() != eps.rows()) throw DomainError("q_sample_pos: shape mismatch");
  return std::sqrt(s.alpha_bar[t]) * x0 + std::sqrt(s.one_minus_alpha_bar[t]) * eps;
}

struct GaussianPosterior {
  CoordMatrix mean;
  double var = 0.0;
};

inline double posterior_coef_x0(const DiffusionSchedule& s, std::size_t t) {
  return std::sqrt(s.alpha_bar[t - 1]) * s.beta[t] / s.one_minus_alpha_bar[t];
}

inline double posterior_coef_xt(const DiffusionSchedule& s, std::size_t t) {
  return std::sqrt(s.alpha[t]) * s.one_minus_alpha_bar[t - 1] / s.one_minus_alpha_bar[t];
}

inline GaussianPosterior posterior_pos(const DiffusionSchedule& s, const CoordMatrix& xt, const CoordMatrix& x0,
                                       std::size_t t) {
  s.check_step(t);
  if (xt.rows() != x0.rows()) throw DomainError("posterior_pos: shape mismatch");
  return {posterior_coef_x0(s, t) * x0 + posterior_coef_xt(s, t) * xt, s.posterior_var[t]};
}

// x_0 implied by a noise estimate.
inline CoordMatrix predict_x0(const DiffusionSchedule& s, const CoordMatrix& xt, const CoordMatrix& eps, std::size_t t) {
  s.check_step(t);
  return (xt - std::sqrt(s.one_minus_alpha_bar[t]) * eps) / std::sqrt(s.alpha_bar[t]);
}

inline double loss_pos_weight(const DiffusionSchedule& s, std::size_t t, bool simple) {
  s.check_step(t);
  if (simple) return 1.0;
  const double b = s.beta[t];
  return b * b / (2.0 * s.sigma2(t) * s.alpha[t] * s.one_minus_alpha_bar[t]);
}

// weight_t * mean over rows of |eps - eps_hat|^2
inline double loss_pos(const DiffusionSchedule& s, const CoordMatrix& eps, const CoordMatrix& eps_hat, std::size_t t,
                       bool simple = false) {
  if (eps.rows() != eps_hat.rows()) throw DomainError("loss_pos: shape mismatch");
  if (eps.rows() == 0) return 0.0;
  return loss_pos_weight(s, t, simple) * (eps - eps_hat).squaredNorm() / static_cast<double>(eps.rows());
}

// d loss_pos / d eps_hat
inline CoordMatrix loss_pos_grad(const DiffusionSchedule& s, const CoordMatrix& eps, const CoordMatrix& eps_hat,
                                 std::size_t t, bool simple = false) {
  if (eps.rows() == 0) return CoordMatrix(0, 3);
  return -2.0 * loss_pos_weight(s, t, simple) / static_cast<double>(eps.rows()) * (eps - eps_hat);
}

}  // namespace amdiff::diffusion
