#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <queue>
#include <vector>

#include "amdiff/molio/molecule.hpp"

namespace amdiff::molio {

// Ring perception by bridge detection: a bond lies on a cycle iff it is not a
// bridge of the molecular graph.
struct RingInfo {
  std::vector<bool> ring_bond;  // per bond
  std::vector<bool> ring_atom;  // per atom
  // Ring systems: connected components of the ring-bond subgraph, each a
  // sorted atom list, ordered by smallest member.
  std::vector<std::vector<std::size_t>> systems;
  // Cyclomatic number E - V + C.
  std::size_t ring_count = 0;
};

inline RingInfo perceive_rings(const MolecularGraph& mol) {
  const std::size_t n = mol.size();
  const auto& bonds = mol.bonds();
  RingInfo info;
  info.ring_bond.assign(bonds.size(), false);
  info.ring_atom.assign(n, false);

  // Iterative Tarjan bridge finding.
  std::vector<int> disc(n, -1), low(n, 0);
  int timer = 0;
  std::vector<bool> is_bridge(bonds.size(), false);
  for (std::size_t root = 0; root < n; ++root) {
    if (disc[root] >= 0) continue;
    struct Frame {
      std::size_t v;
      std::size_t parent_bond;
      std::size_t next;
    };
    std::vector<Frame> stack{{root, bonds.size(), 0}};
    disc[root] = low[root] = timer++;
    while (!stack.empty()) {
      auto& f = stack.back();
      const auto& inc = mol.incident(f.v);
      if (f.next < inc.size()) {
        auto bi = inc[f.next++];
        if (bi == f.parent_bond) continue;
        auto w = bonds[bi].other(f.v);
        if (disc[w] < 0) {
          disc[w] = low[w] = timer++;
          stack.push_back({w, bi, 0});
        } else {
          low[f.v] = std::min(low[f.v], disc[w]);
        }
      } else {
        auto v = f.v;
        auto pb = f.parent_bond;
        stack.pop_back();
        if (!stack.empty()) {
          auto u = stack.back().v;
          low[u] = std::min(low[u], low[v]);
          if (low[v] > disc[u]) is_bridge[pb] = true;
        }
      }
    }
  }

  for (std::size_t b = 0; b < bonds.size(); ++b) {
    info.ring_bond[b] = !is_bridge[b];
    if (info.ring_bond[b]) info.ring_atom[bonds[b].a] = info.ring_atom[bonds[b].b] = true;
  }

  std::vector<int> sys(n, -1);
  for (std::size_t s = 0; s < n; ++s) {
    if (!info.ring_atom[s] || sys[s] >= 0) continue;
    std::vector<std::size_t> members, stack{s};
    sys[s] = static_cast<int>(info.systems.size());
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      members.push_back(u);
      for (auto bi : mol.incident(u)) {
        if (!info.ring_bond[bi]) continue;
        auto w = bonds[bi].other(u);
        if (sys[w] < 0) {
          sys[w] = static_cast<int>(info.systems.size());
          stack.push_back(w);
        }
      }
    }
    std::sort(members.begin(), members.end());
    info.systems.push_back(std::move(members));
  }

  const std::size_t components = connected_components(mol).size();
  info.ring_count = bonds.size() + components - n;
  return info;
}

// Size of the smallest cycle through atom `i`, or 0 when the atom is acyclic.
inline std::size_t smallest_ring_size(const MolecularGraph& mol, std::size_t i) {
  // For each neighbor pair, shortest path avoiding the direct route through i:
  // BFS from i labelling each reached atom with the first-hop branch; a cycle
  // closes when two different branches meet.
  const std::size_t n = mol.size();
  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist(n, none), branch(n, none);
  std::queue<std::size_t> q;
  dist[i] = 0;
  for (auto w : mol.neighbors(i)) {
    dist[w] = 1;
    branch[w] = w;
    q.push(w);
  }
  std::size_t best = 0;
  while (!q.empty()) {
    auto u = q.front();
    q.pop();
    for (auto w : mol.neighbors(u)) {
      if (w == i) continue;
      if (dist[w] == none) {
        dist[w] = dist[u] + 1;
        branch[w] = branch[u];
        q.push(w);
      } else if (branch[w] != branch[u]) {
        std::size_t len = dist[u] + dist[w] + 1;
        if (best == 0 || len < best) best = len;
      }
    }
  }
  return best;
}

}  // namespace amdiff::molio
