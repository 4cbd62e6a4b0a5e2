#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "amdiff/molio/element.hpp"
#include "amdiff/molio/molecule.hpp"

namespace amdiff::molio {

struct ValidityReport {
  bool valid = true;
  std::vector<std::string> violations;

  explicit operator bool() const { return valid; }
};

inline constexpr double kMinAtomDistance = 0.5;  // Angstrom

// Connected, no valence exceeded, no clash. Hydrogens are implicit: unfilled
// valence is fine, only an order sum above the largest allowed valence fails.
// Atoms carrying an aromatic bond get 0.5 of slack so that ring-fusion atoms
// (three aromatic bonds, sum 4.5) pass.
inline ValidityReport check_validity(const MolecularGraph& mol,
                                     const ValenceTable& table = ValenceTable::standard()) {
  ValidityReport r;
  auto fail = [&](std::string msg) {
    r.valid = false;
    r.violations.push_back(std::move(msg));
  };
  if (mol.empty()) {
    fail("empty molecule");
    return r;
  }
  if (connected_components(mol).size() > 1) fail("disconnected");

  char buf[96];
  for (std::size_t i = 0; i < mol.size(); ++i) {
    const auto& el = mol.atom(i).element;
    auto mv = table.max_valence(el);
    if (!mv) continue;
    const double sum = mol.bond_order_sum(i);
    const double slack = mol.has_aromatic_bond(i) ? 0.5 : 0.0;
    if (sum > *mv + slack + 1e-9) {
      std::snprintf(buf, sizeof(buf), "valence %g > %d for %s (atom %zu)", sum, *mv, el.c_str(), i + 1);
      fail(buf);
    }
  }

  for (std::size_t i = 0; i < mol.size(); ++i)
    for (std::size_t j = i + 1; j < mol.size(); ++j) {
      const double d = (mol.atom(i).pos - mol.atom(j).pos).norm();
      if (d < kMinAtomDistance) {
        std::snprintf(buf, sizeof(buf), "clash %.3f A between atoms %zu and %zu", d, i + 1, j + 1);
        fail(buf);
      }
    }
  return r;
}

}  // namespace amdiff::molio
