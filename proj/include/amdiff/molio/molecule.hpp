#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "amdiff/core/error.hpp"
#include "amdiff/core/types.hpp"
#include "amdiff/molio/element.hpp"

namespace amdiff::molio {

enum class BondOrder : int { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

// Aromatic bonds count 1.5 toward valence.
inline double valence_contribution(BondOrder o) {
  switch (o) {
    case BondOrder::Single: return 1.0;
    case BondOrder::Double: return 2.0;
    case BondOrder::Triple: return 3.0;
    case BondOrder::Aromatic: return 1.5;
  }
  return 1.0;
}

inline int mdl_code(BondOrder o) { return static_cast<int>(o); }

struct Atom {
  std::string element;
  Vec3 pos = Vec3::Zero();

  std::size_t type() const { return type_index(element); }
};

struct Bond {
  std::size_t a = 0;
  std::size_t b = 0;
  BondOrder order = BondOrder::Single;

  std::size_t other(std::size_t i) const { return i == a ? b : a; }
};

// A ligand: atoms with 3D coordinates plus an undirected bond list.
class MolecularGraph {
public:
  MolecularGraph() = default;

  MolecularGraph(std::string name, std::vector<Atom> atoms, std::vector<Bond> bonds)
      : name_(std::move(name)), atoms_(std::move(atoms)), bonds_(std::move(bonds)) {
    check();
    build_adjacency();
  }

  const std::string& name() const { return name_; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::vector<Bond>& bonds() const { return bonds_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  const Atom& atom(std::size_t i) const { return atoms_[i]; }

  // Indices into bonds() of bonds touching atom i.
  const std::vector<std::size_t>& incident(std::size_t i) const { return incident_[i]; }

  std::size_t degree(std::size_t i) const { return incident_[i].size(); }

  double bond_order_sum(std::size_t i) const {
    double s = 0.0;
    for (auto bi : incident_[i]) s += valence_contribution(bonds_[bi].order);
    return s;
  }

  bool has_aromatic_bond(std::size_t i) const {
    return std::any_of(incident_[i].begin(), incident_[i].end(),
                       [&](std::size_t bi) { return bonds_[bi].order == BondOrder::Aromatic; });
  }

  std::vector<std::size_t> neighbors(std::size_t i) const {
    std::vector<std::size_t> out;
    out.reserve(incident_[i].size());
    for (auto bi : incident_[i]) out.push_back(bonds_[bi].other(i));
    return out;
  }

  // Index of the bond between i and j, or size() of bonds when absent.
  std::size_t find_bond(std::size_t i, std::size_t j) const {
    for (auto bi : incident_[i])
      if (bonds_[bi].other(i) == j) return bi;
    return bonds_.size();
  }

  Coords coords() const {
    Coords xs;
    xs.reserve(atoms_.size());
    for (const auto& a : atoms_) xs.push_back(a.pos);
    return xs;
  }

  // One-hot type vector v in R^V.
  Eigen::VectorXd type_vector(std::size_t i) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(kNumAtomTypes));
    v(static_cast<Eigen::Index>(atoms_[i].type())) = 1.0;
    return v;
  }

  MolecularGraph with_coords(const Coords& xs) const {
    if (xs.size() != atoms_.size()) throw Error("coordinate count does not match atom count");
    auto atoms = atoms_;
    for (std::size_t i = 0; i < atoms.size(); ++i) atoms[i].pos = xs[i];
    return MolecularGraph(name_, std::move(atoms), bonds_);
  }

  MolecularGraph with_name(std::string name) const {
    MolecularGraph m = *this;
    m.name_ = std::move(name);
    return m;
  }

  // Heavy-atom subgraph with bonds remapped.
  MolecularGraph without_hydrogens() const {
    std::vector<std::size_t> remap(atoms_.size(), atoms_.size());
    std::vector<Atom> atoms;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      if (is_hydrogen(atoms_[i].element)) continue;
      remap[i] = atoms.size();
      atoms.push_back(atoms_[i]);
    }
    std::vector<Bond> bonds;
    for (const auto& b : bonds_) {
      if (remap[b.a] == atoms_.size() || remap[b.b] == atoms_.size()) continue;
      bonds.push_back({remap[b.a], remap[b.b], b.order});
    }
    return MolecularGraph(name_, std::move(atoms), std::move(bonds));
  }

  // Induced subgraph on `members` (in the given order).
  MolecularGraph subgraph(const std::vector<std::size_t>& members) const {
    std::vector<std::size_t> remap(atoms_.size(), atoms_.size());
    std::vector<Atom> atoms;
    for (auto m : members) {
      remap[m] = atoms.size();
      atoms.push_back(atoms_[m]);
    }
    std::vector<Bond> bonds;
    for (const auto& b : bonds_)
      if (remap[b.a] != atoms_.size() && remap[b.b] != atoms_.size())
        bonds.push_back({remap[b.a], remap[b.b], b.order});
    return MolecularGraph(name_, std::move(atoms), std::move(bonds));
  }

private:
  void check() const {
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& b : bonds_) {
      if (b.a >= atoms_.size() || b.b >= atoms_.size()) throw Error("bond index out of range");
      if (b.a == b.b) throw Error("bond endpoints must be distinct");
      auto key = std::minmax(b.a, b.b);
      if (!seen.insert(key).second) throw Error("duplicate bond");
    }
    for (const auto& a : atoms_)
      if (!a.pos.allFinite()) throw Error("non-finite coordinate");
  }

  void build_adjacency() {
    incident_.assign(atoms_.size(), {});
    for (std::size_t i = 0; i < bonds_.size(); ++i) {
      incident_[bonds_[i].a].push_back(i);
      incident_[bonds_[i].b].push_back(i);
    }
  }

  std::string name_;
  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<std::size_t>> incident_;
};

// Connected components as lists of atom indices, each sorted ascending,
// ordered by smallest member.
inline std::vector<std::vector<std::size_t>> connected_components(const MolecularGraph& mol) {
  const std::size_t n = mol.size();
  std::vector<int> comp(n, -1);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<std::size_t> members;
    std::vector<std::size_t> stack{s};
    comp[s] = static_cast<int>(out.size());
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      members.push_back(u);
      for (auto v : mol.neighbors(u))
        if (comp[v] < 0) {
          comp[v] = static_cast<int>(out.size());
          stack.push_back(v);
        }
    }
    std::sort(members.begin(), members.end());
    out.push_back(std::move(members));
  }
  return out;
}

}  // namespace amdiff::molio
