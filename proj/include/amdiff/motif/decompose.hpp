#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "amdiff/core/types.hpp"
#include "amdiff/molio/canonical.hpp"
#include "amdiff/molio/element.hpp"
#include "amdiff/molio/molecule.hpp"
#include "amdiff/molio/rings.hpp"

namespace amdiff::motif {

struct Motif {
  // Vocabulary index; empty means out-of-vocabulary (one-hot slot W).
  std::optional<std::size_t> id;
  std::uint64_t digest = 0;
  Vec3 centroid = Vec3::Zero();
  std::vector<std::size_t> members;  // sorted atom indices

  std::size_t one_hot_index(std::size_t vocab_size) const { return id.value_or(vocab_size); }
};

// Motif-level view of a molecule. Member sets partition the atoms; edges
// join motifs connected by at least one molecular bond.
struct MotifView {
  std::vector<Motif> motifs;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // i < j, sorted, unique

  std::size_t size() const { return motifs.size(); }

  // motif index of every atom
  std::vector<std::size_t> assignment(std::size_t n_atoms) const {
    std::vector<std::size_t> a(n_atoms, motifs.size());
    for (std::size_t m = 0; m < motifs.size(); ++m)
      for (auto i : motifs[m].members) a[i] = m;
    return a;
  }

  Coords centroids() const {
    Coords xs;
    xs.reserve(motifs.size());
    for (const auto& m : motifs) xs.push_back(m.centroid);
    return xs;
  }
};

inline Vec3 heavy_centroid(const molio::MolecularGraph& mol, const std::vector<std::size_t>& members) {
  Vec3 c = Vec3::Zero();
  std::size_t k = 0;
  for (auto i : members) {
    if (molio::is_hydrogen(mol.atom(i).element)) continue;
    c += mol.atom(i).pos;
    ++k;
  }
  if (k == 0) {
    for (auto i : members) c += mol.atom(i).pos;
    k = members.size();
  }
  return k ? Vec3(c / static_cast<double>(k)) : c;
}

// Recomputes centroids from the molecule's current coordinates.
inline MotifView recenter(const MotifView& view, const molio::MolecularGraph& mol) {
  MotifView out = view;
  for (auto& m : out.motifs) m.centroid = heavy_centroid(mol, m.members);
  return out;
}

// Fragmentation rule:
//  (a) every ring system (union of fused rings) is one fragment;
//  (b) an acyclic bond between two non-ring heavy atoms is cut when both
//      sides of the molecule it separates hold at least two heavy atoms;
//  (c) the remaining connected pieces are fragments.
// Hydrogens always stay with the heavy atom they are bonded to.
inline MotifView decompose(const molio::MolecularGraph& mol) {
  const std::size_t n = mol.size();
  const auto rings = molio::perceive_rings(mol);
  const auto& bonds = mol.bonds();
  auto heavy = [&](std::size_t i) { return !molio::is_hydrogen(mol.atom(i).element); };

  std::vector<bool> cut(bonds.size(), false);
  for (std::size_t bi = 0; bi < bonds.size(); ++bi) {
    const auto& b = bonds[bi];
    if (rings.ring_bond[bi]) continue;
    const bool ra = rings.ring_atom[b.a], rb = rings.ring_atom[b.b];
    if (ra || rb) {
      // Ring system boundary.
      if (heavy(b.a) && heavy(b.b)) cut[bi] = true;
      continue;
    }
    if (!heavy(b.a) || !heavy(b.b)) continue;
    // Heavy atoms on b.a's side once the bridge is removed.
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> stack{b.a};
    seen[b.a] = true;
    std::size_t side = 0, total = 0;
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      if (heavy(u)) ++side;
      for (auto bj : mol.incident(u)) {
        if (bj == bi) continue;
        auto w = bonds[bj].other(u);
        if (!seen[w]) {
          seen[w] = true;
          stack.push_back(w);
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) total += heavy(i) ? 1 : 0;
    if (side >= 2 && total - side >= 2) cut[bi] = true;
  }

  // Fragments: components of the graph without cut bonds.
  std::vector<std::size_t> frag(n, n);
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t s = 0; s < n; ++s) {
    if (frag[s] != n) continue;
    std::vector<std::size_t> mem, stack{s};
    frag[s] = members.size();
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      mem.push_back(u);
      for (auto bj : mol.incident(u)) {
        if (cut[bj]) continue;
        auto w = bonds[bj].other(u);
        if (frag[w] == n) {
          frag[w] = members.size();
          stack.push_back(w);
        }
      }
    }
    std::sort(mem.begin(), mem.end());
    members.push_back(std::move(mem));
  }

  MotifView view;
  for (auto& mem : members) {
    Motif m;
    m.digest = molio::canonical_hash(mol.subgraph(mem));
    m.centroid = heavy_centroid(mol, mem);
    m.members = std::move(mem);
    view.motifs.push_back(std::move(m));
  }
  for (std::size_t bi = 0; bi < bonds.size(); ++bi) {
    if (!cut[bi]) continue;
    auto e = std::minmax(frag[bonds[bi].a], frag[bonds[bi].b]);
    view.edges.emplace_back(e.first, e.second);
  }
  std::sort(view.edges.begin(), view.edges.end());
  view.edges.erase(std::unique(view.edges.begin(), view.edges.end()), view.edges.end());
  return view;
}

}  // namespace amdiff::motif
