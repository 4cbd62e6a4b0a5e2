#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "amdiff/core/types.hpp"
#include "amdiff/molio/element.hpp"
#include "amdiff/molio/molecule.hpp"

namespace amdiff::molio {

struct BondPerception {
  double tolerance = 0.4;        // added to the covalent-radius sum, Angstrom
  double double_ratio = 0.87;    // promote to double below this fraction of the radius sum
  double triple_ratio = 0.80;    // promote to triple below this fraction
};

// Distance-based bond perception. A pair is bonded iff its distance is at most
// r_cov(i) + r_cov(j) + tolerance. Short bonds are then promoted to double or
// triple, shortest relative length first, as long as both atoms keep their
// total bond order within the largest allowed valence.
inline std::vector<Bond> infer_bonds(const Coords& coords, const std::vector<std::string>& elements,
                                     const BondPerception& opt = {}) {
  const std::size_t n = coords.size();
  std::vector<Bond> bonds;
  std::vector<double> ratio;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double single = covalent_radius(elements[i]) + covalent_radius(elements[j]);
      const double d = (coords[i] - coords[j]).norm();
      if (d <= single + opt.tolerance) {
        bonds.push_back({i, j, BondOrder::Single});
        ratio.push_back(d / single);
      }
    }
  }

  std::vector<double> order_sum(n, 0.0);
  for (const auto& b : bonds) {
    order_sum[b.a] += 1.0;
    order_sum[b.b] += 1.0;
  }
  const auto& valence = ValenceTable::standard();
  auto room = [&](std::size_t i) {
    auto mv = valence.max_valence(elements[i]);
    return mv ? *mv - order_sum[i] : 0.0;
  };

  std::vector<std::size_t> order(bonds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ratio[a] < ratio[b]; });
  for (auto bi : order) {
    if (ratio[bi] >= opt.double_ratio) break;
    auto& b = bonds[bi];
    const double want = ratio[bi] < opt.triple_ratio ? 2.0 : 1.0;
    const double inc = std::min({want, room(b.a), room(b.b)});
    if (inc >= 2.0) {
      b.order = BondOrder::Triple;
    } else if (inc >= 1.0) {
      b.order = BondOrder::Double;
    } else {
      continue;
    }
    order_sum[b.a] += inc;
    order_sum[b.b] += inc;
  }
  return bonds;
}

inline MolecularGraph bond_atoms(const std::string& name, const Coords& coords,
                                 const std::vector<std::string>& elements, const BondPerception& opt = {}) {
  std::vector<Atom> atoms;
  atoms.reserve(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) atoms.push_back({elements[i], coords[i]});
  return MolecularGraph(name, std::move(atoms), infer_bonds(coords, elements, opt));
}

}  // namespace amdiff::molio
