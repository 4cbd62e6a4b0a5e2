#pragma once

#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "amdiff/core/error.hpp"
#include "amdiff/molio/molecule.hpp"

namespace amdiff::eval {

// Bond label inside a linear pattern: omitted or '-' = single or aromatic,
// '=' double, '#' triple, ':' aromatic, '~' any.
enum class BondQuery { SingleOrAromatic, Double, Triple, Aromatic, Any };

struct LinearPattern {
  std::string text;
  std::vector<std::string> elements;  // 3 for an angle, 4 for a dihedral
  std::vector<BondQuery> bonds;       // elements.size() - 1
};

inline bool bond_matches(BondQuery q, molio::BondOrder o) {
  switch (q) {
    case BondQuery::SingleOrAromatic: return o == molio::BondOrder::Single || o == molio::BondOrder::Aromatic;
    case BondQuery::Double: return o == molio::BondOrder::Double;
    case BondQuery::Triple: return o == molio::BondOrder::Triple;
    case BondQuery::Aromatic: return o == molio::BondOrder::Aromatic;
    case BondQuery::Any: return true;
  }
  return false;
}

inline LinearPattern parse_linear_pattern(const std::string& text) {
  LinearPattern p;
  p.text = text;
  std::size_t i = 0;
  std::optional<BondQuery> pending;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isupper(static_cast<unsigned char>(c))) {
      std::string el(1, c);
      if (i + 1 < text.size() && std::islower(static_cast<unsigned char>(text[i + 1]))) el += text[++i];
      if (!p.elements.empty()) p.bonds.push_back(pending.value_or(BondQuery::SingleOrAromatic));
      pending.reset();
      p.elements.push_back(el);
      ++i;
      continue;
    }
    if (p.elements.empty() || pending) throw ConfigError("bad angle pattern '" + text + "'");
    switch (c) {
      case '-': pending = BondQuery::SingleOrAromatic; break;
      case '=': pending = BondQuery::Double; break;
      case '#': pending = BondQuery::Triple; break;
      case ':': pending = BondQuery::Aromatic; break;
      case '~': pending = BondQuery::Any; break;
      default: throw ConfigError("bad angle pattern '" + text + "'");
    }
    ++i;
  }
  if (pending || p.elements.empty()) throw ConfigError("bad angle pattern '" + text + "'");
  return p;
}

// Degrees in [0, 180].
inline double bond_angle(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 u = a - b, v = c - b;
  const double cosv = std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0);
  return std::acos(cosv) * 180.0 / M_PI;
}

// Degrees in (-180, 180].
inline double dihedral_angle(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  const Vec3 b1 = b - a, b2 = c - b, b3 = d - c;
  const Vec3 n1 = b1.cross(b2), n2 = b2.cross(b3);
  const Vec3 m = n1.cross(b2.normalized());
  return std::atan2(m.dot(n2), n1.dot(n2)) * 180.0 / M_PI;
}

// Every bonded path matching the pattern, each undirected path once.
inline std::vector<double> pattern_values(const molio::MolecularGraph& mol, const LinearPattern& p) {
  const std::size_t L = p.elements.size();
  std::vector<double> out;
  if (L != 3 && L != 4) return out;  // no angle or dihedral to measure
  std::vector<std::size_t> path;
  auto bond_ok = [&](std::size_t a, std::size_t b, std::size_t k) {
    const auto bi = mol.find_bond(a, b);
    return bi < mol.bonds().size() && bond_matches(p.bonds[k], mol.bonds()[bi].order);
  };
  auto emit = [&] {
    // Skip the reversed copy of a path whose pattern reads the same both ways.
    bool reverse_also_matches = true;
    for (std::size_t k = 0; k < L && reverse_also_matches; ++k)
      reverse_also_matches = mol.atom(path[L - 1 - k]).element == p.elements[k];
    for (std::size_t k = 0; k + 1 < L && reverse_also_matches; ++k)
      reverse_also_matches = bond_ok(path[L - 1 - k], path[L - 2 - k], k);
    if (reverse_also_matches && path.front() > path.back()) return;
    const auto& a = mol.atom(path[0]).pos;
    const auto& b = mol.atom(path[1]).pos;
    const auto& c = mol.atom(path[2]).pos;
    out.push_back(L == 3 ? bond_angle(a, b, c) : dihedral_angle(a, b, c, mol.atom(path[3]).pos));
  };
  auto extend = [&](auto&& self) -> void {
    if (path.size() == L) {
      emit();
      return;
    }
    const std::size_t k = path.size();
    for (auto j : mol.neighbors(path.back())) {
      if (std::find(path.begin(), path.end(), j) != path.end()) continue;
      if (mol.atom(j).element != p.elements[k] || !bond_ok(path.back(), j, k - 1)) continue;
      path.push_back(j);
      self(self);
      path.pop_back();
    }
  };
  for (std::size_t i = 0; i < mol.size(); ++i) {
    if (mol.atom(i).element != p.elements[0]) continue;
    path = {i};
    extend(extend);
  }
  return out;
}

struct AngleHistogram {
  double lo = 0.0, width = 2.0;
  std::vector<double> counts;
  std::size_t total = 0;

  AngleHistogram(double lo_, double hi, double width_) : lo(lo_), width(width_) {
    counts.assign(static_cast<std::size_t>(std::llround((hi - lo_) / width_)), 0.0);
  }
  void add(double v) {
    auto k = static_cast<long long>(std::floor((v - lo) / width));
    k = std::clamp<long long>(k, 0, static_cast<long long>(counts.size()) - 1);
    counts[static_cast<std::size_t>(k)] += 1.0;
    ++total;
  }
  // Bin probabilities with `eps` added to each bin before renormalizing.
  std::vector<double> probabilities(double eps) const {
    std::vector<double> p(counts.size());
    double z = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) z += p[i] = counts[i] / static_cast<double>(total) + eps;
    for (auto& v : p) v /= z;
    return p;
  }
};

struct AngleKlOptions {
  double angle_bin = 2.0;
  double dihedral_bin = 5.0;
  double smoothing = 1e-6;
};

struct PatternKl {
  std::string pattern;
  bool dihedral = false;
  std::optional<double> kl;  // absent when either set has no match
  std::size_t ref_count = 0, gen_count = 0;
  std::vector<double> bin_left, ref_density, gen_density;
};

inline PatternKl pattern_kl(const std::vector<molio::MolecularGraph>& reference,
                            const std::vector<molio::MolecularGraph>& generated, const std::string& pattern,
                            const AngleKlOptions& opt = {}) {
  const auto p = parse_linear_pattern(pattern);
  PatternKl r;
  r.pattern = pattern;
  r.dihedral = p.elements.size() == 4;
  const double lo = r.dihedral ? -180.0 : 0.0, hi = 180.0, w = r.dihedral ? opt.dihedral_bin : opt.angle_bin;
  AngleHistogram href(lo, hi, w), hgen(lo, hi, w);
  for (const auto& m : reference)
    for (double v : pattern_values(m, p)) href.add(v);
  for (const auto& m : generated)
    for (double v : pattern_values(m, p)) hgen.add(v);
  r.ref_count = href.total;
  r.gen_count = hgen.total;
  if (href.total == 0 || hgen.total == 0) return r;
  const auto pr = href.probabilities(opt.smoothing), pg = hgen.probabilities(opt.smoothing);
  double kl = 0.0;
  for (std::size_t i = 0; i < pr.size(); ++i) {
    kl += pr[i] * std::log(pr[i] / pg[i]);
    r.bin_left.push_back(lo + w * static_cast<double>(i));
    r.ref_density.push_back(pr[i] / w);
    r.gen_density.push_back(pg[i] / w);
  }
  r.kl = std::max(kl, 0.0);
  return r;
}

struct AngleKlResult {
  std::map<std::string, double> angle_kl, dihedral_kl;
  std::vector<std::string> omitted;  // patterns with no match in one of the sets
  std::vector<PatternKl> details;
};

inline AngleKlResult angle_kl(const std::vector<molio::MolecularGraph>& reference,
                              const std::vector<molio::MolecularGraph>& generated,
                              const std::vector<std::string>& patterns, const AngleKlOptions& opt = {}) {
  if (reference.empty() || generated.empty()) throw DomainError("angle_kl needs nonempty reference and generated sets");
  AngleKlResult out;
  for (const auto& pat : patterns) {
    auto r = pattern_kl(reference, generated, pat, opt);
    if (!r.kl)
      out.omitted.push_back(pat);
    else
      (r.dihedral ? out.dihedral_kl : out.angle_kl)[pat] = *r.kl;
    out.details.push_back(std::move(r));
  }
  return out;
}

// Plot-ready dump: bin_left,ref_density,gen_density.
inline std::string histogram_csv(const PatternKl& r) {
  std::ostringstream os;
  os << "bin_left,ref_density,gen_density\n";
  os.precision(10);
  for (std::size_t i = 0; i < r.bin_left.size(); ++i)
    os << r.bin_left[i] << ',' << r.ref_density[i] << ',' << r.gen_density[i] << '\n';
  return os.str();
}

inline const std::vector<std::string>& default_angle_patterns() {
  static const std::vector<std::string> p{"CCC", "CC=O", "CCO", "CNC", "CCN", "CCCC", "CCCO", "CCNC"};
  return p;
}

}  // namespace amdiff::eval
