#pragma once

#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "amdiff/core/error.hpp"
#include "amdiff/eval/angles.hpp"
#include "amdiff/eval/metrics.hpp"
#include "amdiff/molio/element.hpp"
#include "amdiff/molio/molecule.hpp"
#include "amdiff/molio/rings.hpp"

namespace amdiff::eval {

inline constexpr std::size_t kMaxPatternAtoms = 12;

// Small query graph. Atom labels: an element, '*' for any element, or
// alternatives such as "Cl|Br|I".
struct QueryGraph {
  std::vector<std::vector<std::string>> atoms;  // allowed elements; empty = any
  struct Edge {
    std::size_t a, b;
    BondQuery order;
  };
  std::vector<Edge> bonds;

  bool atom_matches(std::size_t q, const std::string& el) const {
    return atoms[q].empty() || std::find(atoms[q].begin(), atoms[q].end(), el) != atoms[q].end();
  }
};

inline BondQuery parse_bond_query(const std::string& s) {
  if (s == "-") return BondQuery::SingleOrAromatic;
  if (s == "=") return BondQuery::Double;
  if (s == "#") return BondQuery::Triple;
  if (s == ":") return BondQuery::Aromatic;
  if (s == "~") return BondQuery::Any;
  throw ConfigError("unknown bond query '" + s + "'");
}

inline QueryGraph query_from_json(const nlohmann::json& j) {
  QueryGraph q;
  if (!j.is_object() || !j.contains("atoms") || !j.at("atoms").is_array())
    throw ConfigError("substructure pattern needs an 'atoms' array");
  for (const auto& a : j.at("atoms")) {
    if (!a.is_string()) throw ConfigError("pattern atoms must be strings");
    const auto s = a.get<std::string>();
    std::vector<std::string> alts;
    if (s != "*") {
      std::stringstream ss(s);
      std::string part;
      while (std::getline(ss, part, '|')) alts.push_back(part);
    }
    q.atoms.push_back(alts);
  }
  if (q.atoms.empty()) throw ConfigError("empty substructure pattern");
  if (q.atoms.size() > kMaxPatternAtoms)
    throw ConfigError("substructure pattern has " + std::to_string(q.atoms.size()) + " atoms (limit " +
                      std::to_string(kMaxPatternAtoms) + ")");
  if (j.contains("bonds")) {
    for (const auto& b : j.at("bonds")) {
      if (!b.is_array() || b.size() != 3 || !b[0].is_number_unsigned() || !b[1].is_number_unsigned() || !b[2].is_string())
        throw ConfigError("pattern bonds are [i, j, order]");
      QueryGraph::Edge e{b[0].get<std::size_t>(), b[1].get<std::size_t>(), parse_bond_query(b[2].get<std::string>())};
      if (e.a >= q.atoms.size() || e.b >= q.atoms.size() || e.a == e.b) throw ConfigError("pattern bond index out of range");
      q.bonds.push_back(e);
    }
  }
  return q;
}

// Exact subgraph monomorphism by backtracking: distinct molecule atoms for
// distinct query atoms, every query bond present with a matching order.
inline bool has_substructure(const molio::MolecularGraph& mol, const QueryGraph& q) {
  const std::size_t nq = q.atoms.size(), n = mol.size();
  if (nq > n) return false;
  std::vector<std::size_t> map(nq, n);
  std::vector<bool> used(n, false);
  auto consistent = [&](std::size_t k) {
    for (const auto& e : q.bonds) {
      const std::size_t other = e.a == k ? e.b : e.b == k ? e.a : nq;
      if (other == nq || map[other] == n) continue;
      const auto bi = mol.find_bond(map[k], map[other]);
      if (bi == mol.bonds().size() || !bond_matches(e.order, mol.bonds()[bi].order)) return false;
    }
    return true;
  };
  auto place = [&](auto&& self, std::size_t k) -> bool {
    if (k == nq) return true;
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i] || !q.atom_matches(k, mol.atom(i).element)) continue;
      map[k] = i;
      if (consistent(k)) {
        used[i] = true;
        if (self(self, k + 1)) return true;
        used[i] = false;
      }
      map[k] = n;
    }
    return false;
  };
  return place(place, 0);
}

// Molecular weight including the implicit hydrogens that complete each
// atom's valence.
inline double molecular_weight(const molio::MolecularGraph& mol) {
  double w = 0.0;
  const double h = molio::atomic_mass("H");
  for (std::size_t i = 0; i < mol.size(); ++i) w += molio::atomic_mass(mol.atom(i).element) + h * implicit_h(mol, i);
  return w;
}

inline std::size_t heavy_atom_count(const molio::MolecularGraph& mol) {
  std::size_t c = 0;
  for (const auto& a : mol.atoms()) c += !molio::is_hydrogen(a.element);
  return c;
}

// Largest ring size, where each ring atom contributes the smallest ring
// through it (so fused bicycles report their member rings, not the perimeter).
inline std::size_t largest_ring(const molio::MolecularGraph& mol) {
  const auto info = molio::perceive_rings(mol);
  std::size_t best = 0;
  for (std::size_t i = 0; i < mol.size(); ++i)
    if (info.ring_atom[i]) best = std::max(best, molio::smallest_ring_size(mol, i));
  return best;
}

struct FilterRule {
  enum class Kind { Substructure, Property, Similarity };
  std::string name;
  Kind kind = Kind::Substructure;
  std::vector<QueryGraph> patterns;  // substructure: reject on any match
  std::string property;              // "mw", "rings", "heavy_atoms", "largest_ring"
  std::optional<double> min, max;
  double floor = 0.0;                // similarity
};

struct FilterRules {
  std::vector<FilterRule> rules;
  bool needs_reference() const {
    for (const auto& r : rules)
      if (r.kind == FilterRule::Kind::Similarity) return true;
    return false;
  }
};

inline FilterRules rules_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("rules") || !j.at("rules").is_array()) throw ConfigError("rules file needs a 'rules' array");
  FilterRules out;
  for (const auto& r : j.at("rules")) {
    if (!r.is_object() || !r.contains("name") || !r.contains("kind")) throw ConfigError("each rule needs 'name' and 'kind'");
    FilterRule f;
    f.name = r.at("name").get<std::string>();
    const auto kind = r.at("kind").get<std::string>();
    if (kind == "substructure") {
      f.kind = FilterRule::Kind::Substructure;
      if (!r.contains("patterns") || !r.at("patterns").is_array() || r.at("patterns").empty())
        throw ConfigError("rule '" + f.name + "' needs a nonempty 'patterns' array");
      for (const auto& p : r.at("patterns")) f.patterns.push_back(query_from_json(p));
    } else if (kind == "property") {
      f.kind = FilterRule::Kind::Property;
      f.property = r.value("property", "");
      if (f.property != "mw" && f.property != "rings" && f.property != "heavy_atoms" && f.property != "largest_ring")
        throw ConfigError("rule '" + f.name + "': unknown property '" + f.property + "'");
      if (r.contains("min")) f.min = r.at("min").get<double>();
      if (r.contains("max")) f.max = r.at("max").get<double>();
      if (!f.min && !f.max) throw ConfigError("rule '" + f.name + "' needs 'min' or 'max'");
    } else if (kind == "similarity") {
      f.kind = FilterRule::Kind::Similarity;
      if (!r.contains("floor")) throw ConfigError("rule '" + f.name + "' needs 'floor'");
      f.floor = r.at("floor").get<double>();
      if (!(f.floor >= 0.0 && f.floor <= 1.0)) throw ConfigError("rule '" + f.name + "': floor must lie in [0, 1]");
    } else {
      throw ConfigError("rule '" + f.name + "': unknown kind '" + kind + "'");
    }
    out.rules.push_back(std::move(f));
  }
  return out;
}

// Curated stand-in for external structural-alert catalogs.
inline const char* default_rules_json() {
  return R"({
  "rules": [
    {"name": "no three-membered ring", "kind": "substructure",
     "patterns": [{"atoms": ["*", "*", "*"], "bonds": [[0, 1, "~"], [1, 2, "~"], [2, 0, "~"]]}]},
    {"name": "no ring of eight or more atoms", "kind": "property", "property": "largest_ring", "max": 7},
    {"name": "no acyl halide", "kind": "substructure",
     "patterns": [{"atoms": ["C", "O", "F|Cl|Br|I"], "bonds": [[0, 1, "="], [0, 2, "-"]]}]},
    {"name": "no peroxide or disulfide", "kind": "substructure",
     "patterns": [{"atoms": ["O", "O"], "bonds": [[0, 1, "-"]]}, {"atoms": ["S", "S"], "bonds": [[0, 1, "-"]]}]},
    {"name": "no azide or diazo", "kind": "substructure",
     "patterns": [{"atoms": ["N", "N", "N"], "bonds": [[0, 1, "="], [1, 2, "="]]},
                  {"atoms": ["C", "N", "N"], "bonds": [[0, 1, "="], [1, 2, "="]]}]},
    {"name": "no isocyanate or isothiocyanate", "kind": "substructure",
     "patterns": [{"atoms": ["N", "C", "O|S"], "bonds": [[0, 1, "="], [1, 2, "="]]}]},
    {"name": "no triple-bonded heteroatom chain", "kind": "substructure",
     "patterns": [{"atoms": ["N|O|S", "N|O|S"], "bonds": [[0, 1, "#"]]}]},
    {"name": "heavy atoms 5-50", "kind": "property", "property": "heavy_atoms", "min": 5, "max": 50}
  ]
})";
}

inline FilterRules default_rules() { return rules_from_json(nlohmann::json::parse(default_rules_json())); }

struct FilterOutcome {
  std::vector<std::size_t> passed;                             // input indices
  std::vector<std::pair<std::size_t, std::string>> rejected;  // input index, reason
};

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.0f", v);
  return buf;
}

// First failing rule, or nothing when every rule passes.
inline std::optional<std::string> first_failure(const molio::MolecularGraph& mol, const FilterRules& rules,
                                                const std::vector<BitFingerprint>& reference) {
  std::optional<BitFingerprint> fp;
  for (const auto& r : rules.rules) {
    switch (r.kind) {
      case FilterRule::Kind::Substructure:
        for (const auto& q : r.patterns)
          if (has_substructure(mol, q)) return r.name;
        break;
      case FilterRule::Kind::Property: {
        double v = 0.0;
        std::string label;
        if (r.property == "mw") {
          v = molecular_weight(mol);
          label = "MW";
        } else if (r.property == "rings") {
          v = static_cast<double>(molio::perceive_rings(mol).ring_count);
          label = "ring count";
        } else if (r.property == "heavy_atoms") {
          v = static_cast<double>(heavy_atom_count(mol));
          label = "heavy atoms";
        } else {
          v = static_cast<double>(largest_ring(mol));
          label = "largest ring";
        }
        if (r.min && v < *r.min) return label + " " + format_number(v) + " below range";
        if (r.max && v > *r.max) return label + " " + format_number(v) + " above range";
        break;
      }
      case FilterRule::Kind::Similarity: {
        if (reference.empty()) throw ConfigError("rule '" + r.name + "' needs a reference ligand set");
        if (!fp) fp = circular_fingerprint(mol);
        double best = 0.0;
        for (const auto& ref : reference) best = std::max(best, tanimoto(*fp, ref));
        if (best < r.floor) return r.name;
        break;
      }
    }
  }
  return std::nullopt;
}

inline FilterOutcome filter_pipeline(const std::vector<molio::MolecularGraph>& mols, const FilterRules& rules,
                                     const std::vector<molio::MolecularGraph>& reference = {}) {
  std::vector<BitFingerprint> ref_fps;
  for (const auto& m : reference) ref_fps.push_back(circular_fingerprint(m));
  FilterOutcome out;
  for (std::size_t i = 0; i < mols.size(); ++i) {
    if (auto why = first_failure(mols[i], rules, ref_fps))
      out.rejected.emplace_back(i, *why);
    else
      out.passed.push_back(i);
  }
  return out;
}

}  // namespace amdiff::eval
