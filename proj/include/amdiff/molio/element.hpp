#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace amdiff::molio {

// Atom-type alphabet used for one-hot encodings. Every element outside the
// first nine maps to the trailing "other" class.
inline constexpr std::array<std::string_view, 9> kTypedElements = {"C", "N", "O", "F", "P",
                                                                   "S", "Cl", "Br", "I"};
inline constexpr std::size_t kNumAtomTypes = kTypedElements.size() + 1;
inline constexpr std::size_t kOtherType = kTypedElements.size();

// Symbol written for a decoded atom of the "other" class (MDL "any atom").
inline constexpr std::string_view kOtherSymbol = "A";

inline constexpr std::array<std::string_view, 118> kPeriodicTable = {
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si", "P",
    "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh",
    "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W",  "Re",
    "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
    "Pa", "U",  "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db",
    "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};

// Non-element symbols accepted in MDL atom blocks; all of them land in the
// "other" class.
inline constexpr std::array<std::string_view, 4> kPseudoSymbols = {"A", "Q", "*", "R"};

inline bool is_known_symbol(std::string_view s) {
  if (s == "D" || s == "T") return true;
  return std::find(kPeriodicTable.begin(), kPeriodicTable.end(), s) != kPeriodicTable.end() ||
         std::find(kPseudoSymbols.begin(), kPseudoSymbols.end(), s) != kPseudoSymbols.end();
}

inline bool is_hydrogen(std::string_view s) { return s == "H" || s == "D" || s == "T"; }

inline std::size_t type_index(std::string_view symbol) {
  for (std::size_t i = 0; i < kTypedElements.size(); ++i)
    if (kTypedElements[i] == symbol) return i;
  return kOtherType;
}

inline std::string type_symbol(std::size_t type) {
  if (type < kTypedElements.size()) return std::string(kTypedElements[type]);
  return std::string(kOtherSymbol);
}

struct ElementData {
  std::string_view symbol;
  double mass;            // g/mol, IUPAC standard atomic weight
  double covalent_radius; // Angstrom
};

// Single-bond covalent radii from Cordero et al., Dalton Trans. 2008, 2832
// (sp3 value for carbon). Masses are IUPAC 2013 conventional weights.
inline constexpr std::array<ElementData, 16> kElementData = {{
    {"H", 1.008, 0.31},   {"B", 10.81, 0.84},   {"C", 12.011, 0.76},  {"N", 14.007, 0.71},
    {"O", 15.999, 0.66},  {"F", 18.998, 0.57},  {"Si", 28.085, 1.11}, {"P", 30.974, 1.07},
    {"S", 32.06, 1.05},   {"Cl", 35.45, 1.02},  {"Se", 78.971, 1.20}, {"Br", 79.904, 1.20},
    {"I", 126.904, 1.39}, {"Na", 22.990, 1.66}, {"K", 39.098, 2.03},  {"As", 74.922, 1.19},
}};

inline constexpr double kDefaultCovalentRadius = 1.50;
inline constexpr double kDefaultMass = 0.0;

inline std::optional<ElementData> element_data(std::string_view symbol) {
  if (symbol == "D" || symbol == "T") symbol = "H";
  for (const auto& e : kElementData)
    if (e.symbol == symbol) return e;
  return std::nullopt;
}

inline double covalent_radius(std::string_view symbol) {
  auto e = element_data(symbol);
  return e ? e->covalent_radius : kDefaultCovalentRadius;
}

inline double atomic_mass(std::string_view symbol) {
  auto e = element_data(symbol);
  return e ? e->mass : kDefaultMass;
}

// Allowed total bond-order sums per element. Elements without an entry are
// not valence-checked.
struct ValenceTable {
  struct Entry {
    std::string_view symbol;
    std::vector<int> allowed;
  };
  std::vector<Entry> entries;

  static const ValenceTable& standard() {
    static const ValenceTable table{{
        {"H", {1}},  {"B", {3}},     {"C", {4}},        {"N", {3}},
        {"O", {2}},  {"F", {1}},     {"Si", {4}},       {"P", {3, 5}},
        {"S", {2, 4, 6}}, {"Cl", {1}}, {"Se", {2, 4, 6}}, {"Br", {1}},
        {"I", {1}},
    }};
    return table;
  }

  const std::vector<int>* allowed(std::string_view symbol) const {
    if (symbol == "D" || symbol == "T") symbol = "H";
    for (const auto& e : entries)
      if (e.symbol == symbol) return &e.allowed;
    return nullptr;
  }

  std::optional<int> max_valence(std::string_view symbol) const {
    const auto* a = allowed(symbol);
    if (!a || a->empty()) return std::nullopt;
    return *std::max_element(a->begin(), a->end());
  }

  // Implicit hydrogens needed to reach the smallest allowed valence that is
  // at least `bond_sum`.
  int implicit_hydrogens(std::string_view symbol, double bond_sum) const {
    const auto* a = allowed(symbol);
    if (!a) return 0;
    for (int v : *a)
      if (v + 1e-9 >= bond_sum) return static_cast<int>(v - bond_sum + 1e-9);
    return 0;
  }
};

}  // namespace amdiff::molio
