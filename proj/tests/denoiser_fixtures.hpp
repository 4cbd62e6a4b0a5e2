#pragma once

#include <vector>

#include "amdiff/denoiser/graph.hpp"
#include "amdiff/denoiser/network.hpp"
#include "amdiff/denoiser/params.hpp"
#include "test_util.hpp"

namespace amdiff::testing {

using denoiser::ConditionNodes;
using denoiser::DenoiserConfig;
using denoiser::HeteroGraph;
using denoiser::LigandNodes;
using denoiser::MotifNodes;

inline Eigen::VectorXd one_hot(std::size_t n, std::size_t k) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  v(static_cast<Eigen::Index>(k)) = 1.0;
  return v;
}

inline DenoiserConfig small_config(std::size_t hidden, std::size_t layers, std::size_t vocab = 3) {
  DenoiserConfig c;
  c.hidden = hidden;
  c.layers = layers;
  c.k = 3;
  c.vocab = vocab;
  c.rbf = 6;
  c.time_dim = 4;
  c.time_steps = 50;
  return c;
}

// n_atoms ligand atoms split over n_motifs motifs, plus n_pocket fixed atoms.
inline HeteroGraph random_graph(std::mt19937_64& rng, const DenoiserConfig& cfg, std::size_t n_atoms, std::size_t n_motifs,
                         std::size_t n_pocket, std::size_t k) {
  std::uniform_int_distribution<std::size_t> type(0, cfg.n_types - 1), id(0, cfg.id_dim() - 1),
      pf(0, cfg.cond_dim - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LigandNodes lig;
  MotifNodes mot;
  ConditionNodes cond;
  lig.x = random_points(rng, n_atoms, 2.0);
  for (std::size_t i = 0; i < n_atoms; ++i) lig.types.push_back(one_hot(cfg.n_types, type(rng)));
  for (auto& v : lig.topo) v = u(rng);
  mot.x = random_points(rng, n_motifs, 2.0);
  for (std::size_t m = 0; m < n_motifs; ++m) mot.ids.push_back(one_hot(cfg.id_dim(), id(rng)));
  for (std::size_t i = 0; i < n_atoms; ++i) mot.assignment.push_back(i % n_motifs);
  cond.x = random_points(rng, n_pocket, 4.0);
  for (std::size_t i = 0; i < n_pocket; ++i) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cfg.cond_dim));
    f(static_cast<Eigen::Index>(pf(rng))) = 1.0;
    f(static_cast<Eigen::Index>(pf(rng))) = 1.0;
    cond.feats.push_back(f);
  }
  for (auto& v : cond.topo) v = u(rng);
  return denoiser::build_graph(lig, mot, cond, k);
}

inline HeteroGraph permuted(const HeteroGraph& g, const std::vector<std::size_t>& perm) {
  // new node k is old node perm[k]; edges keep their order
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t k = 0; k < perm.size(); ++k) inv[perm[k]] = k;
  HeteroGraph out = g;
  for (std::size_t k = 0; k < perm.size(); ++k) out.nodes[k] = g.nodes[perm[k]];
  for (auto& e : out.edges) {
    e.i = inv[e.i];
    e.j = inv[e.j];
  }
  return out;
}

struct Probe {
  denoiser::OutputGrad weights;

  double loss(const denoiser::DenoiserOutput& o) const {
    return (o.displacement.array() * weights.displacement.array()).sum() +
           (o.type_logits.array() * weights.type_logits.array()).sum() +
           (o.id_logits.array() * weights.id_logits.array()).sum();
  }
};

inline Probe random_probe(std::mt19937_64& rng, const HeteroGraph& g, const denoiser::DenoiserOutput& o) {
  std::normal_distribution<double> n;
  Probe pr;
  pr.weights.displacement = CoordMatrix::NullaryExpr(o.displacement.rows(), 3, [&] { return n(rng); });
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!g.nodes[i].is_mutable) pr.weights.displacement.row(static_cast<Eigen::Index>(i)).setZero();
  pr.weights.type_logits = denoiser::RowMat::NullaryExpr(o.type_logits.rows(), o.type_logits.cols(), [&] { return n(rng); });
  pr.weights.id_logits = denoiser::RowMat::NullaryExpr(o.id_logits.rows(), o.id_logits.cols(), [&] { return n(rng); });
  return pr;
}

}  // namespace amdiff::testing
