#pragma once

#include <algorithm>
#include <bitset>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "amdiff/core/error.hpp"
#include "amdiff/core/hash.hpp"
#include "amdiff/core/types.hpp"
#include "amdiff/molio/canonical.hpp"
#include "amdiff/molio/element.hpp"
#include "amdiff/molio/molecule.hpp"
#include "amdiff/molio/rings.hpp"
#include "amdiff/molio/validity.hpp"

namespace amdiff::eval {

// Index-matched root-mean-square deviation, no superposition.
inline double rmsd(const Coords& a, const Coords& b) {
  if (a.size() != b.size()) throw DomainError("rmsd: conformations differ in atom count");
  if (a.empty()) throw DomainError("rmsd: empty conformation");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]).squaredNorm();
  return std::sqrt(s / static_cast<double>(a.size()));
}

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) throw DomainError("mean_std: empty sample");
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  return {m, std::sqrt(v / static_cast<double>(xs.size()))};
}

// ---------------------------------------------------------------------------
// Fingerprints

inline constexpr std::size_t kFingerprintBits = 2048;
using BitFingerprint = std::bitset<kFingerprintBits>;

inline int implicit_h(const molio::MolecularGraph& mol, std::size_t i) {
  return molio::ValenceTable::standard().implicit_hydrogens(mol.atom(i).element, mol.bond_order_sum(i));
}

// Circular environments up to `radius` bonds, hashed and folded into 2048 bits.
// Atom invariants: element, heavy degree, implicit hydrogens, ring membership.
inline BitFingerprint circular_fingerprint(const molio::MolecularGraph& mol, int radius = 2) {
  const std::size_t n = mol.size();
  const auto rings = molio::perceive_rings(mol);
  std::vector<std::uint64_t> id(n);
  BitFingerprint fp;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t h = fnv1a(mol.atom(i).element);
    h = hash_combine(h, mol.degree(i));
    h = hash_combine(h, static_cast<std::uint64_t>(implicit_h(mol, i)));
    h = hash_combine(h, rings.ring_atom[i] ? 1 : 0);
    id[i] = h;
    fp.set(h % kFingerprintBits);
  }
  for (int r = 1; r <= radius; ++r) {
    std::vector<std::uint64_t> next(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::uint64_t> env;
      for (auto bi : mol.incident(i)) {
        const auto& b = mol.bonds()[bi];
        env.push_back(hash_combine(static_cast<std::uint64_t>(b.order), id[b.other(i)]));
      }
      std::sort(env.begin(), env.end());
      std::uint64_t h = hash_combine(id[i], static_cast<std::uint64_t>(r));
      for (auto e : env) h = hash_combine(h, e);
      next[i] = h;
      fp.set(h % kFingerprintBits);
    }
    id = std::move(next);
  }
  return fp;
}

inline double tanimoto(const BitFingerprint& a, const BitFingerprint& b) {
  const std::size_t uni = (a | b).count();
  if (uni == 0) return 1.0;
  return static_cast<double>((a & b).count()) / static_cast<double>(uni);
}

// ---------------------------------------------------------------------------
// Scaffolds and set metrics

// Repeatedly removes non-ring atoms with at most one remaining neighbor; ring
// systems and the linkers between them survive. Acyclic molecules reduce to
// the empty graph.
inline molio::MolecularGraph scaffold(const molio::MolecularGraph& mol) {
  const auto rings = molio::perceive_rings(mol);
  const std::size_t n = mol.size();
  std::vector<bool> alive(n, true);
  std::vector<std::size_t> deg(n);
  for (std::size_t i = 0; i < n; ++i) deg[i] = mol.degree(i);
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i] || rings.ring_atom[i] || deg[i] > 1) continue;
      alive[i] = false;
      changed = true;
      for (auto j : mol.neighbors(i))
        if (alive[j]) --deg[j];
    }
  }
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < n; ++i)
    if (alive[i]) keep.push_back(i);
  return mol.subgraph(keep).with_name(mol.name());
}

inline std::uint64_t scaffold_hash(const molio::MolecularGraph& mol) { return molio::canonical_hash(scaffold(mol)); }

inline std::set<std::uint64_t> scaffold_hashes(const std::vector<molio::MolecularGraph>& mols) {
  std::set<std::uint64_t> out;
  for (const auto& m : mols) out.insert(scaffold_hash(m));
  return out;
}

struct SetMetrics {
  std::optional<double> validity, uniqueness, diversity, novelty;
  std::size_t generated = 0, valid = 0, unique = 0, scaffolds = 0;
};

inline SetMetrics set_metrics(const std::vector<molio::MolecularGraph>& generated,
                              const std::set<std::uint64_t>& train_scaffolds,
                              const std::set<std::uint64_t>& test_scaffolds) {
  SetMetrics r;
  r.generated = generated.size();
  if (generated.empty()) return r;
  // Representatives keyed by canonical hash: isomorphic graphs share
  // fingerprints and scaffolds, so the choice of representative is immaterial.
  std::map<std::uint64_t, const molio::MolecularGraph*> unique;
  for (const auto& m : generated) {
    if (!molio::check_validity(m).valid) continue;
    ++r.valid;
    unique.emplace(molio::canonical_hash(m), &m);
  }
  r.validity = static_cast<double>(r.valid) / static_cast<double>(r.generated);
  r.unique = unique.size();
  if (r.valid == 0) return r;
  r.uniqueness = static_cast<double>(r.unique) / static_cast<double>(r.valid);

  std::vector<BitFingerprint> fps;
  std::set<std::uint64_t> scaffolds;
  for (const auto& [h, m] : unique) {
    fps.push_back(circular_fingerprint(*m));
    scaffolds.insert(scaffold_hash(*m));
  }
  r.scaffolds = scaffolds.size();
  if (fps.size() >= 2) {
    double s = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < fps.size(); ++i)
      for (std::size_t j = i + 1; j < fps.size(); ++j) {
        s += 1.0 - tanimoto(fps[i], fps[j]);
        ++pairs;
      }
    r.diversity = s / static_cast<double>(pairs);
  }
  std::size_t novel = 0;
  for (auto h : scaffolds) novel += !train_scaffolds.count(h) && !test_scaffolds.count(h);
  r.novelty = static_cast<double>(novel) / static_cast<double>(scaffolds.size());
  return r;
}

// ---------------------------------------------------------------------------
// Shape descriptors

// Normalized principal-moment ratios with unit masses about the centroid.
inline std::pair<double, double> npr_descriptors(const Coords& xs) {
  if (xs.size() < 3) throw DomainError("npr needs at least 3 atoms");
  const Vec3 c = centroid(xs);
  Mat3 I = Mat3::Zero();
  for (const auto& x : xs) {
    const Vec3 r = x - c;
    I += r.squaredNorm() * Mat3::Identity() - r * r.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> es(I);
  const Vec3 ev = es.eigenvalues();  // ascending
  if (!(ev(2) > 0.0)) throw DomainError("npr: all atoms coincide");
  const double scale = ev(2);
  double i1 = std::max(ev(0), 0.0) / scale, i2 = ev(1) / scale;
  // Collinear input: the smallest moment is zero up to rounding.
  if (i1 < 1e-9) i1 = 0.0;
  return {i1, i2};
}

inline std::pair<double, double> npr_descriptors(const molio::MolecularGraph& mol) { return npr_descriptors(mol.coords()); }

}  // namespace amdiff::eval
