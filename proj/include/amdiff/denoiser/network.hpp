#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "amdiff/core/error.hpp"
#include "amdiff/core/types.hpp"
#include "amdiff/denoiser/graph.hpp"
#include "amdiff/denoiser/params.hpp"

namespace amdiff::denoiser {

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline RowMat silu(const RowMat& a) {
  return a.unaryExpr([](double x) { return x * sigmoid(x); });
}

// g * silu'(a), elementwise
inline RowMat silu_backward(const RowMat& a, const RowMat& g) {
  RowMat out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      const double x = a(r, c), s = sigmoid(x);
      out(r, c) = g(r, c) * s * (1.0 + x * (1.0 - s));
    }
  return out;
}

inline Eigen::RowVectorXd time_features(int t, const DenoiserConfig& cfg) {
  const double tau = 1000.0 * static_cast<double>(t) / static_cast<double>(cfg.time_steps);
  const std::size_t half = cfg.time_dim / 2;
  Eigen::RowVectorXd f(static_cast<Eigen::Index>(cfg.time_dim));
  for (std::size_t k = 0; k < half; ++k) {
    const double w = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(half));
    f(static_cast<Eigen::Index>(k)) = std::sin(tau * w);
    f(static_cast<Eigen::Index>(half + k)) = std::cos(tau * w);
  }
  return f;
}

inline double rbf_width(const DenoiserConfig& cfg) { return cfg.rbf_cutoff / static_cast<double>(cfg.rbf - 1); }

}  // namespace detail

struct DenoiserOutput {
  CoordMatrix displacement;  // x^L - x^0 per node; zero for fixed nodes
  RowMat type_logits;        // one row per ligand-atom node, in node order
  RowMat id_logits;          // one row per motif node, in node order
  std::vector<std::size_t> atom_nodes;
  std::vector<std::size_t> motif_nodes;
};

struct OutputGrad {
  CoordMatrix displacement;
  RowMat type_logits;
  RowMat id_logits;
};

struct ForwardCache {
  struct Layer {
    RowMat h;
    CoordMatrix x;
    CoordMatrix diff;
    Eigen::VectorXd dist;
    RowMat z, a1, s1, a2, m;
    RowMat fin, b1, g1;
    RowMat c1, cs;
    Eigen::VectorXd s;
  };
  std::vector<Layer> layers;
  RowMat type_in, type_pre, type_act;
  RowMat id_in, id_pre, id_act;
  Eigen::RowVectorXd temb;
};

namespace detail {

inline void embed_row(const DenoiserParams& p, const GraphNode& node, bool conditional, Eigen::Index i, RowMat& h) {
  const auto& cfg = p.config();
  auto check = [&](std::size_t want) {
    if (static_cast<std::size_t>(node.feat.size()) != want)
      throw DomainError("node feature width " + std::to_string(node.feat.size()) + ", expected " +
                        std::to_string(want));
  };
  switch (node.kind) {
    case NodeKind::LigandAtom:
      check(cfg.n_types);
      h.row(i) = node.feat.transpose() * p.mat(p.atom_w()) + p.row(p.atom_b()) +
                 node.topo.transpose() * p.mat(p.topo_ligand());
      break;
    case NodeKind::Motif:
      check(cfg.id_dim());
      h.row(i) = node.feat.transpose() * p.mat(p.motif_w()) + p.row(p.motif_b()) +
                 node.topo.transpose() * p.mat(p.topo_ligand());
      break;
    default:
      if (!conditional) {
        h.row(i) = p.row(p.null_embedding());
      } else {
        check(cfg.cond_dim);
        h.row(i) = node.feat.transpose() * p.mat(p.cond_w()) + p.row(p.cond_b()) +
                   node.topo.transpose() * p.mat(p.topo_pocket());
      }
  }
}

inline void run_head(const RowMat& in, const DenoiserParams& p, const DenoiserParams::Head& hd, RowMat& pre,
                     RowMat& act, RowMat& out) {
  pre = in.lazyProduct(p.mat(hd.w1));
  pre.rowwise() += p.row(hd.b1);
  act = silu(pre);
  out = act.lazyProduct(p.mat(hd.w2));
  out.rowwise() += p.row(hd.b2);
}

}  // namespace detail

// Products are coefficient-based so that every row is computed the same way
// wherever it sits; that keeps node permutations bit-exact.
//
// One pass of the equivariant network. Messages, node updates and
// coordinate updates follow the usual EGNN layout; the coordinate update of
// node i is sum_j (x_i - x_j) / (d_ij + 1) * s_ij with s_ij a scalar network
// of the message, so it rotates with the input.
inline DenoiserOutput forward(const HeteroGraph& g, const DenoiserParams& p, int t, bool conditional,
                              ForwardCache* cache = nullptr) {
  const auto& cfg = p.config();
  if (t < 1 || static_cast<std::size_t>(t) > cfg.time_steps)
    throw DomainError("time step " + std::to_string(t) + " outside [1, " + std::to_string(cfg.time_steps) + "]");
  const auto N = static_cast<Eigen::Index>(g.size());
  const auto E = static_cast<Eigen::Index>(g.edges.size());
  const auto H = static_cast<Eigen::Index>(cfg.hidden);
  const auto R = static_cast<Eigen::Index>(cfg.rbf);
  const auto TD = static_cast<Eigen::Index>(cfg.time_dim);
  const Eigen::Index off_edge = 2 * H, off_time = off_edge + static_cast<Eigen::Index>(kNumEdgeTypes),
                     off_rbf = off_time + TD, off_d = off_rbf + R;
  const double width = detail::rbf_width(cfg);
  const double inv_k = g.k ? 1.0 / static_cast<double>(g.k) : 1.0;

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c = ForwardCache{};
  c.temb = detail::time_features(t, cfg);

  RowMat h(N, H);
  for (Eigen::Index i = 0; i < N; ++i) detail::embed_row(p, g.nodes[static_cast<std::size_t>(i)], conditional, i, h);
  CoordMatrix x = g.coords();
  const CoordMatrix x0 = x;

  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const auto& P = p.layer(l);
    auto& L = c.layers.emplace_back();
    L.h = h;
    L.x = x;
    L.diff.resize(E, 3);
    L.dist.resize(E);
    L.z = RowMat::Zero(E, static_cast<Eigen::Index>(cfg.edge_dim()));
    for (Eigen::Index e = 0; e < E; ++e) {
      const auto& ed = g.edges[static_cast<std::size_t>(e)];
      const auto i = static_cast<Eigen::Index>(ed.i), j = static_cast<Eigen::Index>(ed.j);
      L.diff.row(e) = x.row(i) - x.row(j);
      const double d = L.diff.row(e).norm();
      L.dist(e) = d;
      L.z.row(e).segment(0, H) = h.row(i);
      L.z.row(e).segment(H, H) = h.row(j);
      L.z(e, off_edge + ed.type) = 1.0;
      L.z.row(e).segment(off_time, TD) = c.temb;
      for (Eigen::Index k = 0; k < R; ++k) {
        const double u = (d - static_cast<double>(k) * width) / width;
        L.z(e, off_rbf + k) = std::exp(-u * u);
      }
      L.z(e, off_d) = d / cfg.rbf_cutoff;
    }
    L.a1 = L.z.lazyProduct(p.mat(P.mes_w1));
    L.a1.rowwise() += p.row(P.mes_b1);
    L.s1 = detail::silu(L.a1);
    L.a2 = L.s1.lazyProduct(p.mat(P.mes_w2));
    L.a2.rowwise() += p.row(P.mes_b2);
    L.m = detail::silu(L.a2);

    RowMat agg = RowMat::Zero(N, H);
    for (Eigen::Index e = 0; e < E; ++e) agg.row(static_cast<Eigen::Index>(g.edges[static_cast<std::size_t>(e)].i)) += L.m.row(e);
    agg *= inv_k;
    L.fin.resize(N, 2 * H);
    L.fin.leftCols(H) = h;
    L.fin.rightCols(H) = agg;
    L.b1 = L.fin.lazyProduct(p.mat(P.node_w1));
    L.b1.rowwise() += p.row(P.node_b1);
    L.g1 = detail::silu(L.b1);
    RowMat h_next = h + L.g1.lazyProduct(p.mat(P.node_w2));
    h_next.rowwise() += p.row(P.node_b2);

    L.c1 = L.m.lazyProduct(p.mat(P.coord_w1));
    L.c1.rowwise() += p.row(P.coord_b1);
    L.cs = detail::silu(L.c1);
    L.s = L.cs.lazyProduct(p.mat(P.coord_w2)).col(0).array() + p.row(P.coord_b2)(0);
    for (Eigen::Index e = 0; e < E; ++e) {
      const auto i = g.edges[static_cast<std::size_t>(e)].i;
      if (!g.nodes[i].is_mutable) continue;
      x.row(static_cast<Eigen::Index>(i)) += L.diff.row(e) * (L.s(e) / (L.dist(e) + 1.0));
    }
    h = std::move(h_next);
    if (!h.allFinite() || !x.allFinite())
      throw NumericError("non-finite activation in denoiser layer " + std::to_string(l));
  }

  DenoiserOutput out;
  out.atom_nodes = g.nodes_of(NodeKind::LigandAtom);
  out.motif_nodes = g.nodes_of(NodeKind::Motif);
  out.displacement = x - x0;
  c.type_in.resize(static_cast<Eigen::Index>(out.atom_nodes.size()), H);
  for (std::size_t r = 0; r < out.atom_nodes.size(); ++r)
    c.type_in.row(static_cast<Eigen::Index>(r)) = h.row(static_cast<Eigen::Index>(out.atom_nodes[r]));
  c.id_in.resize(static_cast<Eigen::Index>(out.motif_nodes.size()), H);
  for (std::size_t r = 0; r < out.motif_nodes.size(); ++r)
    c.id_in.row(static_cast<Eigen::Index>(r)) = h.row(static_cast<Eigen::Index>(out.motif_nodes[r]));
  detail::run_head(c.type_in, p, p.type_head(), c.type_pre, c.type_act, out.type_logits);
  detail::run_head(c.id_in, p, p.id_head(), c.id_pre, c.id_act, out.id_logits);
  if (!out.type_logits.allFinite() || !out.id_logits.allFinite())
    throw NumericError("non-finite logits in denoiser layer " + std::to_string(cfg.layers));
  return out;
}

// Reverse-mode gradients of a scalar loss with respect to every parameter,
// given dL/d(outputs) and the cache of the matching forward call.
inline DenoiserParams backward(const HeteroGraph& g, const DenoiserParams& p, bool conditional,
                               const ForwardCache& c, const OutputGrad& go) {
  const auto& cfg = p.config();
  const auto N = static_cast<Eigen::Index>(g.size());
  const auto E = static_cast<Eigen::Index>(g.edges.size());
  const auto H = static_cast<Eigen::Index>(cfg.hidden);
  const auto R = static_cast<Eigen::Index>(cfg.rbf);
  const Eigen::Index off_rbf = 2 * H + static_cast<Eigen::Index>(kNumEdgeTypes + cfg.time_dim);
  const Eigen::Index off_d = off_rbf + R;
  const double width = detail::rbf_width(cfg);
  const double inv_k = g.k ? 1.0 / static_cast<double>(g.k) : 1.0;
  if (c.layers.size() != cfg.layers) throw DomainError("forward cache does not match the parameters");

  DenoiserParams gp = p.zeros_like();
  RowMat gH = RowMat::Zero(N, H);
  CoordMatrix gX = go.displacement;
  if (gX.rows() != N) throw DomainError("displacement gradient has the wrong row count");

  auto head_back = [&](const DenoiserParams::Head& hd, const RowMat& in, const RowMat& pre, const RowMat& act,
                       const RowMat& gl, const std::vector<std::size_t>& rows) {
    if (gl.rows() == 0) return;
    gp.mat(hd.w2).noalias() += act.transpose() * gl;
    gp.row(hd.b2) += gl.colwise().sum();
    RowMat gpre = detail::silu_backward(pre, gl * p.mat(hd.w2).transpose());
    gp.mat(hd.w1).noalias() += in.transpose() * gpre;
    gp.row(hd.b1) += gpre.colwise().sum();
    RowMat gin = gpre * p.mat(hd.w1).transpose();
    for (std::size_t r = 0; r < rows.size(); ++r)
      gH.row(static_cast<Eigen::Index>(rows[r])) += gin.row(static_cast<Eigen::Index>(r));
  };
  head_back(p.type_head(), c.type_in, c.type_pre, c.type_act, go.type_logits, g.nodes_of(NodeKind::LigandAtom));
  head_back(p.id_head(), c.id_in, c.id_pre, c.id_act, go.id_logits, g.nodes_of(NodeKind::Motif));

  for (std::size_t l = cfg.layers; l-- > 0;) {
    const auto& P = p.layer(l);
    const auto& L = c.layers[l];
    RowMat gm = RowMat::Zero(E, H);
    Eigen::VectorXd gdist = Eigen::VectorXd::Zero(E);
    CoordMatrix gdiff = CoordMatrix::Zero(E, 3);
    Eigen::VectorXd gs = Eigen::VectorXd::Zero(E);

    for (Eigen::Index e = 0; e < E; ++e) {
      const auto i = g.edges[static_cast<std::size_t>(e)].i;
      if (!g.nodes[i].is_mutable) continue;
      const double inv = 1.0 / (L.dist(e) + 1.0);
      const auto gxi = gX.row(static_cast<Eigen::Index>(i));
      gdiff.row(e) += gxi * (L.s(e) * inv);
      const double gc = gxi.dot(L.diff.row(e));
      gs(e) = gc * inv;
      gdist(e) -= gc * L.s(e) * inv * inv;
    }
    gp.mat(P.coord_w2).noalias() += L.cs.transpose() * gs;
    gp.row(P.coord_b2)(0) += gs.sum();
    RowMat gcs = gs * p.mat(P.coord_w2).transpose();
    RowMat gc1 = detail::silu_backward(L.c1, gcs);
    gp.mat(P.coord_w1).noalias() += L.m.transpose() * gc1;
    gp.row(P.coord_b1) += gc1.colwise().sum();
    gm.noalias() += gc1 * p.mat(P.coord_w1).transpose();

    RowMat gH_prev = gH;
    gp.mat(P.node_w2).noalias() += L.g1.transpose() * gH;
    gp.row(P.node_b2) += gH.colwise().sum();
    RowMat gb1 = detail::silu_backward(L.b1, gH * p.mat(P.node_w2).transpose());
    gp.mat(P.node_w1).noalias() += L.fin.transpose() * gb1;
    gp.row(P.node_b1) += gb1.colwise().sum();
    RowMat gfin = gb1 * p.mat(P.node_w1).transpose();
    gH_prev += gfin.leftCols(H);
    for (Eigen::Index e = 0; e < E; ++e)
      gm.row(e) += inv_k * gfin.row(static_cast<Eigen::Index>(g.edges[static_cast<std::size_t>(e)].i)).tail(H);

    RowMat ga2 = detail::silu_backward(L.a2, gm);
    gp.mat(P.mes_w2).noalias() += L.s1.transpose() * ga2;
    gp.row(P.mes_b2) += ga2.colwise().sum();
    RowMat ga1 = detail::silu_backward(L.a1, ga2 * p.mat(P.mes_w2).transpose());
    gp.mat(P.mes_w1).noalias() += L.z.transpose() * ga1;
    gp.row(P.mes_b1) += ga1.colwise().sum();
    RowMat gz = ga1 * p.mat(P.mes_w1).transpose();

    CoordMatrix gX_prev = gX;
    for (Eigen::Index e = 0; e < E; ++e) {
      const auto& ed = g.edges[static_cast<std::size_t>(e)];
      const auto i = static_cast<Eigen::Index>(ed.i), j = static_cast<Eigen::Index>(ed.j);
      gH_prev.row(i) += gz.row(e).segment(0, H);
      gH_prev.row(j) += gz.row(e).segment(H, H);
      const double d = L.dist(e);
      double gd = gdist(e) + gz(e, off_d) / cfg.rbf_cutoff;
      for (Eigen::Index k = 0; k < R; ++k) {
        const double u = (d - static_cast<double>(k) * width) / width;
        gd += gz(e, off_rbf + k) * std::exp(-u * u) * (-2.0 * u / width);
      }
      if (d > 0.0) gdiff.row(e) += gd * L.diff.row(e) / d;
      gX_prev.row(i) += gdiff.row(e);
      gX_prev.row(j) -= gdiff.row(e);
    }
    gX = std::move(gX_prev);
    gH = std::move(gH_prev);
  }

  for (Eigen::Index i = 0; i < N; ++i) {
    const auto& node = g.nodes[static_cast<std::size_t>(i)];
    const auto gh = gH.row(i);
    switch (node.kind) {
      case NodeKind::LigandAtom:
        gp.mat(p.atom_w()).noalias() += node.feat * gh;
        gp.row(p.atom_b()) += gh;
        gp.mat(p.topo_ligand()).noalias() += node.topo * gh;
        break;
      case NodeKind::Motif:
        gp.mat(p.motif_w()).noalias() += node.feat * gh;
        gp.row(p.motif_b()) += gh;
        gp.mat(p.topo_ligand()).noalias() += node.topo * gh;
        break;
      default:
        if (!conditional) {
          gp.row(p.null_embedding()) += gh;
        } else {
          gp.mat(p.cond_w()).noalias() += node.feat * gh;
          gp.row(p.cond_b()) += gh;
          gp.mat(p.topo_pocket()).noalias() += node.topo * gh;
        }
    }
  }
  if (!gp.all_finite()) throw NumericError("non-finite parameter gradient");
  return gp;
}

}  // namespace amdiff::denoiser
