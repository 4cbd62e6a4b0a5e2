#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <numeric>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "amdiff/core/error.hpp"
#include "amdiff/core/types.hpp"

namespace amdiff::topo {

inline constexpr std::size_t kMaxPoints = 1000;

struct Bar {
  double birth = 0.0;
  double death = 0.0;
  bool essential = false;  // never dies below max_filtration; death is truncated

  double persistence() const { return death - birth; }
};

// Persistence diagram of a Vietoris-Rips filtration, dimensions 0 and 1.
struct PersistenceDiagram {
  std::array<std::vector<Bar>, 2> dims;
  double max_filtration = 0.0;
  int max_dim = 1;

  const std::vector<Bar>& bars(int dim) const { return dims.at(static_cast<std::size_t>(dim)); }

  std::vector<Bar> finite_bars(int dim) const {
    std::vector<Bar> out;
    for (const auto& b : bars(dim))
      if (!b.essential) out.push_back(b);
    return out;
  }

  // CSV with header "dim,birth,death"; essential bars carry the truncated death.
  std::string to_csv() const {
    std::string out = "dim,birth,death\n";
    char buf[96];
    for (int d = 0; d <= max_dim; ++d)
      for (const auto& b : bars(d)) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", d, b.birth, b.death);
        out += buf;
      }
    return out;
  }
};

namespace detail {

class UnionFind {
public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  // Merges the younger root into the older (smaller index) one.
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
    return true;
  }

private:
  std::vector<std::size_t> parent_;
};

struct Edge {
  double length;
  std::size_t i, j;
};

}  // namespace detail

// Persistent homology of the Rips complex over pairwise Euclidean distances,
// truncated at `max_filtration`. H0 comes from union-find over the sorted
// edges; H1 from column reduction of the triangle boundary matrix over Z/2.
// Zero-length H1 pairs are dropped. Classes alive at max_filtration are
// reported as essential bars dying at max_filtration.
inline PersistenceDiagram rips_persistence(const Coords& points, double max_filtration, int max_dim = 1) {
  const std::size_t n = points.size();
  if (n == 0) throw DomainError("persistence needs at least one point");
  if (n > kMaxPoints)
    throw SizeError("point cloud of " + std::to_string(n) + " points exceeds the limit of " +
                    std::to_string(kMaxPoints));
  if (!(max_filtration > 0.0)) throw DomainError("max_filtration must be positive");
  if (max_dim < 0 || max_dim > 1) throw DomainError("max_dim must be 0 or 1");

  PersistenceDiagram pd;
  pd.max_filtration = max_filtration;
  pd.max_dim = max_dim;

  std::vector<double> dist(n * n, 0.0);
  std::vector<detail::Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = (points[i] - points[j]).norm();
      dist[i * n + j] = dist[j * n + i] = d;
      if (d <= max_filtration) edges.push_back({d, i, j});
    }
  std::sort(edges.begin(), edges.end(), [](const auto& a, const auto& b) {
    return std::tie(a.length, a.i, a.j) < std::tie(b.length, b.i, b.j);
  });

  // H0
  detail::UnionFind uf(n);
  std::vector<bool> negative_edge(edges.size(), false);
  std::size_t merges = 0;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (uf.unite(edges[e].i, edges[e].j)) {
      negative_edge[e] = true;
      pd.dims[0].push_back({0.0, edges[e].length, false});
      ++merges;
    }
  }
  for (std::size_t k = merges; k < n; ++k) pd.dims[0].push_back({0.0, max_filtration, true});
  if (max_dim < 1) return pd;

  // H1
  std::vector<std::size_t> edge_order(n * n, 0);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    edge_order[edges[e].i * n + edges[e].j] = e;
    edge_order[edges[e].j * n + edges[e].i] = e;
  }
  struct Triangle {
    double diameter;
    std::array<std::size_t, 3> faces;  // edge filtration indices, descending
  };
  std::vector<Triangle> triangles;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (dist[i * n + j] > max_filtration) continue;
      for (std::size_t k = j + 1; k < n; ++k) {
        const double dik = dist[i * n + k], djk = dist[j * n + k];
        if (dik > max_filtration || djk > max_filtration) continue;
        Triangle t;
        t.diameter = std::max({dist[i * n + j], dik, djk});
        t.faces = {edge_order[i * n + j], edge_order[i * n + k], edge_order[j * n + k]};
        std::sort(t.faces.begin(), t.faces.end(), std::greater<>());
        triangles.push_back(t);
      }
    }
  // Filtration order: diameter, then reverse-lexicographic face indices. Every
  // triangle follows its faces because its largest face has the same diameter
  // and edges precede triangles of equal value.
  std::sort(triangles.begin(), triangles.end(), [](const Triangle& a, const Triangle& b) {
    if (a.diameter != b.diameter) return a.diameter < b.diameter;
    return a.faces < b.faces;
  });

  std::unordered_map<std::size_t, std::size_t> pivot_of;  // low edge -> reduced column
  std::vector<std::vector<std::size_t>> reduced;          // descending edge indices
  std::vector<bool> paired_edge(edges.size(), false);
  reduced.reserve(triangles.size());
  for (const auto& t : triangles) {
    std::vector<std::size_t> col(t.faces.begin(), t.faces.end());
    while (!col.empty()) {
      auto it = pivot_of.find(col.front());
      if (it == pivot_of.end()) break;
      // col ^= reduced[it->second], both sorted descending
      const auto& other = reduced[it->second];
      std::vector<std::size_t> merged;
      merged.reserve(col.size() + other.size());
      std::size_t a = 0, b = 0;
      while (a < col.size() || b < other.size()) {
        if (b == other.size() || (a < col.size() && col[a] > other[b])) {
          merged.push_back(col[a++]);
        } else if (a == col.size() || other[b] > col[a]) {
          merged.push_back(other[b++]);
        } else {
          ++a;
          ++b;
        }
      }
      col.swap(merged);
    }
    if (col.empty()) continue;
    const std::size_t low = col.front();
    pivot_of.emplace(low, reduced.size());
    reduced.push_back(std::move(col));
    paired_edge[low] = true;
    const double birth = edges[low].length;
    if (t.diameter > birth) pd.dims[1].push_back({birth, t.diameter, false});
  }
  for (std::size_t e = 0; e < edges.size(); ++e)
    if (!negative_edge[e] && !paired_edge[e] && edges[e].length < max_filtration)
      pd.dims[1].push_back({edges[e].length, max_filtration, true});

  std::sort(pd.dims[1].begin(), pd.dims[1].end(), [](const Bar& a, const Bar& b) {
    return std::tie(a.birth, a.death) < std::tie(b.birth, b.death);
  });
  return pd;
}

}  // namespace amdiff::topo
