#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "amdiff/core/error.hpp"
#include "amdiff/core/types.hpp"
#include "amdiff/molio/element.hpp"
#include "amdiff/molio/sdf.hpp"

namespace amdiff::molio {

inline constexpr std::array<std::string_view, 20> kAminoAcids = {
    "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE",
    "LEU", "LYS", "MET", "PHE", "PRO", "SER", "THR", "TRP", "TYR", "VAL"};
inline constexpr std::size_t kNumResidueTypes = kAminoAcids.size() + 1;
inline constexpr std::size_t kPocketFeatureDim = kNumAtomTypes + kNumResidueTypes;

inline std::size_t residue_index(std::string_view res) {
  for (std::size_t i = 0; i < kAminoAcids.size(); ++i)
    if (kAminoAcids[i] == res) return i;
  return kAminoAcids.size();
}

struct PocketAtom {
  std::string element;
  std::string residue;  // three-letter residue name
  std::string label;    // "RES chain seq"
  Vec3 pos = Vec3::Zero();

  // Element one-hot followed by residue-type one-hot (20 amino acids + other).
  Eigen::VectorXd features() const {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(kPocketFeatureDim));
    f(static_cast<Eigen::Index>(type_index(element))) = 1.0;
    f(static_cast<Eigen::Index>(kNumAtomTypes + residue_index(residue))) = 1.0;
    return f;
  }
};

// Binding-site condition: pocket atoms R within `radius` of a ligand site plus
// the full protein as context P. Coordinates are in the input frame.
struct PocketCloud {
  std::vector<PocketAtom> atoms;
  std::vector<PocketAtom> context;
  Vec3 center = Vec3::Zero();
  double radius = 0.0;

  std::size_t size() const { return atoms.size(); }

  std::vector<std::string> residue_labels() const {
    std::vector<std::string> out;
    out.reserve(atoms.size());
    for (const auto& a : atoms) out.push_back(a.label);
    return out;
  }

  Coords coords() const {
    Coords xs;
    xs.reserve(atoms.size());
    for (const auto& a : atoms) xs.push_back(a.pos);
    return xs;
  }

  PocketCloud transformed(const RigidMotion& m) const {
    PocketCloud p = *this;
    for (auto& a : p.atoms) a.pos = m.apply(a.pos);
    for (auto& a : p.context) a.pos = m.apply(a.pos);
    p.center = m.apply(center);
    return p;
  }
};

namespace detail {

inline std::string element_from_atom_name(std::string_view name) {
  std::string s;
  for (char c : name)
    if (std::isalpha(static_cast<unsigned char>(c))) {
      s += c;
      break;
    }
  return s;
}

inline std::string normalize_element(std::string_view raw) {
  std::string e(trim(raw));
  if (e.empty()) return e;
  e[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(e[0])));
  for (std::size_t i = 1; i < e.size(); ++i)
    e[i] = static_cast<char>(std::tolower(static_cast<unsigned char>(e[i])));
  return e;
}

}  // namespace detail

// Every heavy ATOM/HETATM record (waters and hydrogens dropped). Coordinates
// come from columns 31-54, the element from columns 77-78 (falling back to
// the atom name).
inline std::vector<PocketAtom> parse_pdb_atoms(std::string_view text) {
  std::vector<PocketAtom> out;
  auto lines = detail::split_lines(text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    std::string_view line = lines[ln];
    if (line.rfind("ATOM", 0) != 0 && line.rfind("HETATM", 0) != 0) continue;
    PocketAtom a;
    if (!detail::parse_double(detail::column(line, 30, 8), a.pos.x()) ||
        !detail::parse_double(detail::column(line, 38, 8), a.pos.y()) ||
        !detail::parse_double(detail::column(line, 46, 8), a.pos.z()) || !a.pos.allFinite())
      throw ParseError("unparseable coordinate columns on line " + std::to_string(ln + 1));
    a.residue = std::string(detail::trim(detail::column(line, 17, 3)));
    if (a.residue == "HOH" || a.residue == "WAT") continue;
    a.element = detail::normalize_element(detail::column(line, 76, 2));
    if (a.element.empty())
      a.element = detail::normalize_element(detail::element_from_atom_name(detail::column(line, 12, 4)));
    if (is_hydrogen(a.element)) continue;
    std::string chain(detail::trim(detail::column(line, 21, 1)));
    std::string seq(detail::trim(detail::column(line, 22, 4)));
    a.label = a.residue + " " + (chain.empty() ? "_" : chain) + " " + seq;
    out.push_back(std::move(a));
  }
  return out;
}

inline PocketCloud make_pocket(std::vector<PocketAtom> members, std::vector<PocketAtom> context,
                               double radius) {
  if (members.empty()) throw DomainError("empty pocket: no protein atom within the cutoff");
  PocketCloud p;
  p.atoms = std::move(members);
  p.context = std::move(context);
  p.radius = radius;
  Vec3 c = Vec3::Zero();
  for (const auto& a : p.atoms) c += a.pos;
  p.center = c / static_cast<double>(p.atoms.size());
  return p;
}

// Extracts the pocket: protein atoms within `radius` of `ligand_center`.
inline PocketCloud parse_pocket_pdb(std::string_view text, const Vec3& ligand_center, double radius) {
  if (!(radius > 0.0)) throw DomainError("pocket radius must be positive");
  auto all = parse_pdb_atoms(text);
  if (all.empty()) throw DomainError("empty pocket: no ATOM records");
  std::vector<PocketAtom> members;
  for (const auto& a : all)
    if ((a.pos - ligand_center).norm() <= radius) members.push_back(a);
  return make_pocket(std::move(members), std::move(all), radius);
}

// Treats every atom of an already-extracted pocket file as a pocket member.
inline PocketCloud load_pocket_pdb(std::string_view text) {
  auto all = parse_pdb_atoms(text);
  if (all.empty()) throw DomainError("empty pocket: no ATOM records");
  double r = 0.0;
  Vec3 c = Vec3::Zero();
  for (const auto& a : all) c += a.pos;
  c /= static_cast<double>(all.size());
  for (const auto& a : all) r = std::max(r, (a.pos - c).norm());
  auto context = all;
  return make_pocket(std::move(all), std::move(context), r);
}

inline std::string write_pdb(const std::vector<PocketAtom>& atoms) {
  std::string out;
  char buf[128];
  std::size_t serial = 1;
  for (const auto& a : atoms) {
    // Label is "RES chain seq".
    std::string chain = "A";
    int seq = 1;
    {
      auto p1 = a.label.find(' ');
      auto p2 = a.label.find(' ', p1 + 1);
      if (p1 != std::string::npos && p2 != std::string::npos) {
        chain = a.label.substr(p1 + 1, p2 - p1 - 1);
        if (chain == "_") chain = " ";
        seq = std::atoi(a.label.substr(p2 + 1).c_str());
      }
    }
    std::snprintf(buf, sizeof(buf), "ATOM  %5zu  %-3s %3s %1s%4d    %8.3f%8.3f%8.3f  1.00  0.00          %2s\n",
                  serial++ % 100000, a.element.c_str(), a.residue.c_str(), chain.c_str(), seq,
                  a.pos.x(), a.pos.y(), a.pos.z(), a.element.c_str());
    out += buf;
  }
  out += "END\n";
  return out;
}

}  // namespace amdiff::molio
