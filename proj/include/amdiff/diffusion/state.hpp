#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "amdiff/core/error.hpp"
#include "amdiff/core/types.hpp"
#include "amdiff/denoiser/graph.hpp"
#include "amdiff/diffusion/categorical.hpp"
#include "amdiff/diffusion/schedule.hpp"
#include "amdiff/molio/molecule.hpp"
#include "amdiff/molio/pdb.hpp"
#include "amdiff/motif/decompose.hpp"

namespace amdiff::diffusion {

// Both views of a ligand in pocket-normalized coordinates: (x - center) / scale.
struct LigandState {
  CoordMatrix atoms;
  std::vector<std::size_t> types;  // atom type index in [0, V)
  CoordMatrix motifs;
  std::vector<std::size_t> ids;  // motif one-hot slot in [0, W]
};

// Frame that maps normalized coordinates to Angstrom.
struct Frame {
  Vec3 center = Vec3::Zero();
  double scale = 1.0;

  Vec3 point_to_angstrom(const Eigen::RowVector3d& r) const { return center + scale * r.transpose(); }
  Coords to_angstrom(const CoordMatrix& m) const {
    Coords out;
    out.reserve(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(point_to_angstrom(m.row(i)));
    return out;
  }
  CoordMatrix to_normalized(const Coords& xs) const {
    CoordMatrix m(static_cast<Eigen::Index>(xs.size()), 3);
    for (std::size_t i = 0; i < xs.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = ((xs[i] - center) / scale).transpose();
    return m;
  }
};

// Angstrom length of one unit of predicted noise at step t. The network's
// displacement is read as the noise component of x_t expressed in Angstrom,
// eps_hat = displacement / (scale * sqrt(1 - alpha_bar_t)), so its size
// follows the noise level instead of staying at the pocket scale.
inline double noise_unit(const Frame& f, const DiffusionSchedule& s, std::size_t t) {
  return f.scale * std::sqrt(s.one_minus_alpha_bar[t]);
}

inline Frame pocket_frame(const molio::PocketCloud& pocket) {
  if (pocket.atoms.empty()) throw DomainError("empty pocket");
  if (!(pocket.radius > 0.0)) throw DomainError("pocket radius must be positive");
  return {pocket.center, pocket.radius};
}

// Condition nodes for the denoiser: pocket atoms with their fingerprint.
inline denoiser::ConditionNodes condition_nodes(const molio::PocketCloud& pocket) {
  denoiser::ConditionNodes c;
  for (const auto& a : pocket.atoms) {
    c.x.push_back(a.pos);
    c.feats.push_back(a.features());
  }
  c.topo = denoiser::topo_features(c.x);
  return c;
}

// Index of the nearest motif for every atom; ties go to the lower index.
inline std::vector<std::size_t> nearest_motif(const CoordMatrix& atoms, const CoordMatrix& motifs) {
  if (motifs.rows() == 0) throw DomainError("no motif nodes");
  std::vector<std::size_t> out(static_cast<std::size_t>(atoms.rows()));
  for (Eigen::Index i = 0; i < atoms.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (Eigen::Index m = 0; m < motifs.rows(); ++m) {
      const double d = (atoms.row(i) - motifs.row(m)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<std::size_t>(m);
      }
    }
    out[static_cast<std::size_t>(i)] = arg;
  }
  return out;
}

namespace detail {

inline std::vector<std::vector<std::size_t>> members_of(const std::vector<std::size_t>& assignment, std::size_t m) {
  std::vector<std::vector<std::size_t>> out(m);
  for (std::size_t i = 0; i < assignment.size(); ++i) out[assignment[i]].push_back(i);
  return out;
}

inline Eigen::RowVector3d cluster_mean(const CoordMatrix& atoms, const std::vector<std::size_t>& idx) {
  Eigen::RowVector3d s = Eigen::RowVector3d::Zero();
  for (auto i : idx) s += atoms.row(static_cast<Eigen::Index>(i));
  return s / static_cast<double>(idx.size());
}

// Moves each motif centroid to gamma * (mean of its atoms) + (1 - gamma) *
// (its own value) and translates its atoms by (1 - gamma) of the residual, so
// afterwards both views agree on the centroid. Motifs without atoms are left
// alone.
inline void project(CoordMatrix& atoms, CoordMatrix& motifs, const std::vector<std::size_t>& assignment,
                    double gamma) {
  const auto groups = members_of(assignment, static_cast<std::size_t>(motifs.rows()));
  for (std::size_t m = 0; m < groups.size(); ++m) {
    if (groups[m].empty()) continue;
    const auto r = static_cast<Eigen::Index>(m);
    const Eigen::RowVector3d mean = cluster_mean(atoms, groups[m]);
    const Eigen::RowVector3d residual = motifs.row(r) - mean;
    motifs.row(r) = gamma * mean + (1.0 - gamma) * motifs.row(r);
    for (auto i : groups[m]) atoms.row(static_cast<Eigen::Index>(i)) += (1.0 - gamma) * residual;
  }
}

inline double centroid_gap(const CoordMatrix& atoms, const CoordMatrix& motifs,
                           const std::vector<std::size_t>& assignment) {
  const auto groups = members_of(assignment, static_cast<std::size_t>(motifs.rows()));
  double gap = 0.0;
  for (std::size_t m = 0; m < groups.size(); ++m)
    if (!groups[m].empty())
      gap = std::max(gap, (motifs.row(static_cast<Eigen::Index>(m)) - cluster_mean(atoms, groups[m])).norm());
  return gap;
}

}  // namespace detail

// Heterogeneous graph for one denoising call. The ligand fingerprint is taken
// from the current (noisy) atom cloud so training and sampling see the same
// kind of input.
inline denoiser::HeteroGraph state_graph(const LigandState& s, const std::vector<std::size_t>& assignment,
                                         const denoiser::ConditionNodes& cond, const Frame& f, std::size_t n_types,
                                         std::size_t id_dim, std::size_t k) {
  denoiser::LigandNodes lig;
  lig.x = f.to_angstrom(s.atoms);
  for (auto v : s.types) lig.types.push_back(one_hot(n_types, v));
  lig.topo = denoiser::topo_features(lig.x);
  denoiser::MotifNodes mot;
  mot.x = f.to_angstrom(s.motifs);
  for (auto w : s.ids) mot.ids.push_back(one_hot(id_dim, w));
  mot.assignment = assignment;
  return denoiser::build_graph(lig, mot, cond, k);
}

}  // namespace amdiff::diffusion
