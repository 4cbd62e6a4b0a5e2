#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Core>

#include "amdiff/core/error.hpp"
#include "amdiff/diffusion/schedule.hpp"

namespace amdiff::diffusion {

using Prob = Eigen::VectorXd;

inline constexpr double kProbFloor = 1e-12;

inline Prob one_hot(std::size_t K, std::size_t k) {
  if (k >= K) throw DomainError("class index out of range");
  Prob v = Prob::Zero(static_cast<Eigen::Index>(K));
  v(static_cast<Eigen::Index>(k)) = 1.0;
  return v;
}

inline Prob softmax(const Eigen::VectorXd& z) {
  const double m = z.maxCoeff();
  Prob p = (z.array() - m).exp().matrix();
  return p / p.sum();
}

inline std::size_t argmax(const Eigen::VectorXd& v) {
  Eigen::Index k = 0;
  v.maxCoeff(&k);
  return static_cast<std::size_t>(k);
}

// q(v_t | v_0) = alpha_bar_t v_0 + (1 - alpha_bar_t) / K
inline Prob q_probs(const DiffusionSchedule& s, const Prob& v0, std::size_t t) {
  if (v0.size() < 2) throw DomainError("categorical diffusion needs K >= 2");
  if (t > s.T) throw DomainError("time step outside schedule");
  const double ab = s.alpha_bar[t];
  return (ab * v0.array() + (1.0 - ab) / static_cast<double>(v0.size())).matrix();
}

template <class Rng>
std::size_t sample_categorical(const Prob& p, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng) * p.sum();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    acc += p(k);
    if (u < acc) return static_cast<std::size_t>(k);
  }
  // Rounding can leave u at the very top; return the last class with mass.
  for (Eigen::Index k = p.size(); k-- > 0;)
    if (p(k) > 0.0) return static_cast<std::size_t>(k);
  throw DomainError("categorical distribution has no mass");
}

template <class Rng>
std::size_t q_sample_type(const DiffusionSchedule& s, std::size_t v0, std::size_t K, std::size_t t, Rng& rng) {
  s.check_step(t);
  return sample_categorical(q_probs(s, one_hot(K, v0), t), rng);
}

// q(v_{t-1} | v_t, v_0). v_0 may be a distribution (the predicted v_0).
inline Prob posterior_type(const DiffusionSchedule& s, const Prob& vt, const Prob& v0, std::size_t t) {
  s.check_step(t);
  if (vt.size() != v0.size() || vt.size() < 2) throw DomainError("posterior_type: shape mismatch or K < 2");
  const double K = static_cast<double>(vt.size());
  const Eigen::ArrayXd a = s.alpha[t] * vt.array() + (1.0 - s.alpha[t]) / K;
  const Eigen::ArrayXd b = s.alpha_bar[t - 1] * v0.array() + (1.0 - s.alpha_bar[t - 1]) / K;
  const Eigen::ArrayXd g = a * b;
  return (g / g.sum()).matrix();
}

// KL(q_true || q_pred) with 0 log 0 = 0 and q_pred floored.
inline double loss_type(const Prob& q_true, const Prob& q_pred) {
  if (q_true.size() != q_pred.size()) throw DomainError("loss_type: shape mismatch");
  double kl = 0.0;
  for (Eigen::Index k = 0; k < q_true.size(); ++k)
    if (q_true(k) > 0.0) kl += q_true(k) * std::log(q_true(k) / std::max(q_pred(k), kProbFloor));
  return kl;
}

// Gradient of loss_type(q_true, posterior_type(v_t, softmax(z), t)) with
// respect to the logits z.
inline Eigen::VectorXd loss_type_grad_logits(const DiffusionSchedule& s, const Prob& vt, const Prob& q_true,
                                             const Eigen::VectorXd& z, std::size_t t) {
  const double K = static_cast<double>(vt.size());
  const Prob p = softmax(z);
  const Eigen::ArrayXd a = s.alpha[t] * vt.array() + (1.0 - s.alpha[t]) / K;
  const double c = s.alpha_bar[t - 1];
  const Eigen::ArrayXd g = a * (c * p.array() + (1.0 - c) / K);
  const double S = g.sum();
  const Eigen::ArrayXd q = g / S;
  Eigen::ArrayXd gq = Eigen::ArrayXd::Zero(q.size());
  for (Eigen::Index k = 0; k < q.size(); ++k)
    if (q_true(k) > 0.0 && q(k) >= kProbFloor) gq(k) = -q_true(k) / q(k);
  const Eigen::ArrayXd gg = (gq - (gq * q).sum()) / S;
  const Eigen::ArrayXd gp = gg * a * c;
  return (p.array() * (gp - (gp * p.array()).sum())).matrix();
}

}  // namespace amdiff::diffusion
