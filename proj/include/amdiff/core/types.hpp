#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace amdiff {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Coords = std::vector<Vec3>;

// Row-major n x 3 view of coordinates used by the diffusion math.
using CoordMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

inline CoordMatrix to_matrix(const Coords& xs) {
  CoordMatrix m(static_cast<Eigen::Index>(xs.size()), 3);
  for (std::size_t i = 0; i < xs.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = xs[i].transpose();
  return m;
}

inline Coords to_coords(const CoordMatrix& m) {
  Coords xs(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) xs[static_cast<std::size_t>(i)] = m.row(i).transpose();
  return xs;
}

inline Vec3 centroid(const Coords& xs) {
  Vec3 c = Vec3::Zero();
  if (xs.empty()) return c;
  for (const auto& x : xs) c += x;
  return c / static_cast<double>(xs.size());
}

// Rigid motion x -> R x + t.
struct RigidMotion {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }

  Coords apply(const Coords& xs) const {
    Coords out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(apply(x));
    return out;
  }
};

}  // namespace amdiff
