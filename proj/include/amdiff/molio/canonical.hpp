#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <vector>

#include "amdiff/core/hash.hpp"
#include "amdiff/molio/molecule.hpp"

namespace amdiff::molio {

// Isomorphism-invariant 64-bit digest of the labelled graph (element and bond
// order; coordinates ignored). Atom labels are refined Morgan-style, each
// round hashing the atom's label with the sorted multiset of
// (bond order, neighbor label) pairs, until the number of distinct labels
// stops growing. The digest hashes the sorted multiset of final labels
// together with the sorted multiset of bond descriptors.
inline std::uint64_t canonical_hash(const MolecularGraph& mol) {
  const std::size_t n = mol.size();
  std::vector<std::uint64_t> label(n);
  for (std::size_t i = 0; i < n; ++i)
    label[i] = hash_combine(fnv1a(mol.atom(i).element), mol.degree(i));

  auto distinct = [](const std::vector<std::uint64_t>& v) {
    return std::set<std::uint64_t>(v.begin(), v.end()).size();
  };
  std::size_t classes = distinct(label);
  // At most n rounds are needed for the partition to stabilise.
  for (std::size_t round = 0; round <= n; ++round) {
    std::vector<std::uint64_t> next(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::uint64_t> env;
      for (auto bi : mol.incident(i)) {
        const auto& b = mol.bonds()[bi];
        env.push_back(hash_combine(static_cast<std::uint64_t>(b.order), label[b.other(i)]));
      }
      std::sort(env.begin(), env.end());
      std::uint64_t h = label[i];
      for (auto e : env) h = hash_combine(h, e);
      next[i] = h;
    }
    const std::size_t next_classes = distinct(next);
    label.swap(next);
    if (next_classes == classes) break;
    classes = next_classes;
  }

  std::vector<std::uint64_t> atoms = label;
  std::sort(atoms.begin(), atoms.end());
  std::vector<std::uint64_t> bonds;
  for (const auto& b : mol.bonds()) {
    auto [lo, hi] = std::minmax(label[b.a], label[b.b]);
    bonds.push_back(hash_combine(hash_combine(lo, hi), static_cast<std::uint64_t>(b.order)));
  }
  std::sort(bonds.begin(), bonds.end());

  std::uint64_t h = hash_combine(0x616d64696666ULL, n);
  for (auto a : atoms) h = hash_combine(h, a);
  h = hash_combine(h, bonds.size());
  for (auto b : bonds) h = hash_combine(h, b);
  return h;
}

}  // namespace amdiff::molio
