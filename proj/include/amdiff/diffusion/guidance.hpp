#pragma once

#include <Eigen/Core>

#include "amdiff/core/error.hpp"

namespace amdiff::diffusion {

// eps_uncond + s (eps_cond - eps_uncond), evaluated as s eps_cond + (1 - s)
// eps_uncond so that s = 1 and s = 0 reproduce one side bit for bit. Also
// used for logits.
template <class A, class B>
auto cfg_combine(const Eigen::MatrixBase<A>& cond, const Eigen::MatrixBase<B>& uncond, double s) {
  if (cond.rows() != uncond.rows() || cond.cols() != uncond.cols()) throw DomainError("cfg_combine: shape mismatch");
  using Plain = typename A::PlainObject;
  Plain out = s * cond + (1.0 - s) * uncond;
  return out;
}

}  // namespace amdiff::diffusion
