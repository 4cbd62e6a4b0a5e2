#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "amdiff/core/error.hpp"
#include "amdiff/topo/persistence.hpp"

namespace amdiff::topo {

struct Entropy {
  double entropy = 0.0;     // E(D_l), bits
  double normalized = 0.0;  // E(D_l) / log2(total persistence)
};

// Shannon entropy of the persistence distribution over the finite bars of one
// dimension, normalized by log2 of the total persistence. Essential bars are
// excluded.
inline Entropy persistence_entropy(const PersistenceDiagram& pd, int dim) {
  const auto bars = pd.finite_bars(dim);
  if (bars.empty()) throw DomainError("entropy undefined: no finite bars in dimension " + std::to_string(dim));
  double total = 0.0;
  for (const auto& b : bars) total += b.persistence();
  if (!(total > 0.0)) throw DomainError("entropy undefined: total persistence is zero");
  double e = 0.0;
  for (const auto& b : bars) {
    const double p = b.persistence() / total;
    if (p > 0.0) e -= p * std::log2(p);
  }
  const double denom = std::log2(total);
  if (std::abs(denom) < 1e-12) throw DomainError("entropy normalization singular: total persistence is 1");
  return {e, e / denom};
}

inline constexpr std::size_t kFingerprintBlock = 4;
inline constexpr std::size_t kFingerprintDim = 2 * kFingerprintBlock;
inline constexpr double kFingerprintFiltration = 6.0;  // Angstrom

// Per homology dimension: [normalized entropy, total persistence, max
// persistence, finite-bar count].
using TopoFingerprint = std::array<double, kFingerprintDim>;

inline TopoFingerprint fingerprint_from_diagram(const PersistenceDiagram& pd) {
  TopoFingerprint fp{};
  for (int dim = 0; dim <= 1; ++dim) {
    const std::size_t off = static_cast<std::size_t>(dim) * kFingerprintBlock;
    if (dim > pd.max_dim) continue;
    const auto bars = pd.finite_bars(dim);
    if (bars.empty()) continue;
    double total = 0.0, longest = 0.0;
    for (const auto& b : bars) {
      total += b.persistence();
      longest = std::max(longest, b.persistence());
    }
    try {
      fp[off] = persistence_entropy(pd, dim).normalized;
    } catch (const DomainError&) {
      fp[off] = 0.0;
    }
    fp[off + 1] = total;
    fp[off + 2] = longest;
    fp[off + 3] = static_cast<double>(bars.size());
  }
  return fp;
}

inline TopoFingerprint fingerprint(const Coords& points, double max_filtration = kFingerprintFiltration) {
  if (points.size() < 2) throw DomainError("fingerprint needs at least two points");
  return fingerprint_from_diagram(rips_persistence(points, max_filtration, 1));
}

}  // namespace amdiff::topo
