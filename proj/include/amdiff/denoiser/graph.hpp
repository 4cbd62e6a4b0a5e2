#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <Eigen/Core>

#include "amdiff/core/error.hpp"
#include "amdiff/core/types.hpp"
#include "amdiff/topo/fingerprint.hpp"

namespace amdiff::denoiser {

enum class NodeKind : std::uint8_t { LigandAtom = 0, Motif = 1, PocketAtom = 2, ProteinAtom = 3 };

inline constexpr std::size_t kNumNodeKinds = 4;
inline constexpr std::uint8_t kEdgeAtomToMotif = 16;
inline constexpr std::uint8_t kEdgeMotifToAtom = 17;
inline constexpr std::size_t kNumEdgeTypes = 18;

inline std::uint8_t edge_type(NodeKind a, NodeKind b) {
  return static_cast<std::uint8_t>(static_cast<std::size_t>(a) * kNumNodeKinds + static_cast<std::size_t>(b));
}

inline bool is_condition(NodeKind k) { return k == NodeKind::PocketAtom || k == NodeKind::ProteinAtom; }

inline constexpr std::size_t kTopoDim = topo::kFingerprintDim;
using TopoFeatures = Eigen::Matrix<double, static_cast<int>(kTopoDim), 1>;

// Network input form of a fingerprint: entropy as is, magnitudes log1p'd.
inline TopoFeatures topo_features(const topo::TopoFingerprint& fp) {
  TopoFeatures f;
  for (std::size_t i = 0; i < kTopoDim; ++i) {
    const bool entropy_slot = i % topo::kFingerprintBlock == 0;
    f(static_cast<Eigen::Index>(i)) = entropy_slot ? fp[i] : std::log1p(std::max(0.0, fp[i]));
  }
  return f;
}

// Fingerprint of a point set; sets with fewer than two points get zeros.
inline TopoFeatures topo_features(const Coords& pts) {
  if (pts.size() < 2) return TopoFeatures::Zero();
  return topo_features(topo::fingerprint(pts));
}

struct GraphNode {
  NodeKind kind = NodeKind::LigandAtom;
  // Type distribution for atoms (V), ID one-hot for motifs (W+1), residue
  // features for pocket/protein atoms.
  Eigen::VectorXd feat;
  TopoFeatures topo = TopoFeatures::Zero();
  Vec3 x = Vec3::Zero();
  bool is_mutable = true;
};

// Node i aggregates messages from node j.
struct GraphEdge {
  std::size_t i = 0;
  std::size_t j = 0;
  std::uint8_t type = 0;
};

struct HeteroGraph {
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
  std::size_t k = 0;
  bool k_clamped = false;

  std::size_t size() const { return nodes.size(); }

  std::vector<std::size_t> nodes_of(NodeKind kind) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].kind == kind) out.push_back(i);
    return out;
  }

  CoordMatrix coords() const {
    CoordMatrix x(static_cast<Eigen::Index>(nodes.size()), 3);
    for (std::size_t i = 0; i < nodes.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = nodes[i].x.transpose();
    return x;
  }
};

// Directed k-NN edges (ties to the lower index) plus the given cross-view
// pairs in both directions. Pairs are (atom node, motif node).
inline HeteroGraph connect(std::vector<GraphNode> nodes,
                           const std::vector<std::pair<std::size_t, std::size_t>>& cross, std::size_t k) {
  if (k < 1) throw DomainError("k must be at least 1");
  const std::size_t n = nodes.size();
  if (n < 2) throw DomainError("graph needs at least two nodes");
  HeteroGraph g;
  g.k = k;
  if (k >= n) {
    g.k = n - 1;
    g.k_clamped = true;
  }
  std::vector<std::size_t> order(n);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) d2[j] = (nodes[i].x - nodes[j].x).squaredNorm();
    order.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) order.push_back(j);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(g.k), order.end(),
                      [&](std::size_t a, std::size_t b) { return d2[a] < d2[b] || (d2[a] == d2[b] && a < b); });
    for (std::size_t r = 0; r < g.k; ++r)
      g.edges.push_back({i, order[r], edge_type(nodes[i].kind, nodes[order[r]].kind)});
  }
  for (const auto& [a, m] : cross) {
    if (a >= n || m >= n) throw DomainError("cross-view pair out of range");
    g.edges.push_back({a, m, kEdgeAtomToMotif});
    g.edges.push_back({m, a, kEdgeMotifToAtom});
  }
  g.nodes = std::move(nodes);
  return g;
}

struct LigandNodes {
  Coords x;
  std::vector<Eigen::VectorXd> types;
  TopoFeatures topo = TopoFeatures::Zero();
};

struct MotifNodes {
  Coords x;
  std::vector<Eigen::VectorXd> ids;
  std::vector<std::size_t> assignment;  // motif index of every ligand atom
};

struct ConditionNodes {
  Coords x;
  std::vector<Eigen::VectorXd> feats;
  std::vector<NodeKind> kinds;  // PocketAtom or ProteinAtom; empty means all pocket
  TopoFeatures topo = TopoFeatures::Zero();
};

// Node order: ligand atoms, motifs, condition atoms.
inline HeteroGraph build_graph(const LigandNodes& lig, const MotifNodes& mot, const ConditionNodes& cond,
                               std::size_t k) {
  if (lig.x.size() != lig.types.size() || mot.x.size() != mot.ids.size() || cond.x.size() != cond.feats.size())
    throw DomainError("node coordinate and feature counts differ");
  if (mot.assignment.size() != lig.x.size()) throw DomainError("motif assignment does not cover every atom");
  std::vector<GraphNode> nodes;
  for (std::size_t i = 0; i < lig.x.size(); ++i)
    nodes.push_back({NodeKind::LigandAtom, lig.types[i], lig.topo, lig.x[i], true});
  const std::size_t m0 = nodes.size();
  for (std::size_t m = 0; m < mot.x.size(); ++m) nodes.push_back({NodeKind::Motif, mot.ids[m], lig.topo, mot.x[m], true});
  for (std::size_t i = 0; i < cond.x.size(); ++i) {
    const NodeKind kind = cond.kinds.empty() ? NodeKind::PocketAtom : cond.kinds[i];
    nodes.push_back({kind, cond.feats[i], cond.topo, cond.x[i], false});
  }
  std::vector<std::pair<std::size_t, std::size_t>> cross;
  for (std::size_t i = 0; i < mot.assignment.size(); ++i) {
    if (mot.assignment[i] >= mot.x.size()) throw DomainError("atom assigned to a missing motif");
    cross.emplace_back(i, m0 + mot.assignment[i]);
  }
  return connect(std::move(nodes), cross, k);
}

}  // namespace amdiff::denoiser
