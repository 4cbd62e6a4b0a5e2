#pragma once

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "amdiff/core/error.hpp"
#include "amdiff/molio/molecule.hpp"

namespace amdiff::molio {

using SdfProperties = std::vector<std::pair<std::string, std::string>>;

struct SdfRecord {
  MolecularGraph mol;
  SdfProperties properties;

  const std::string* property(std::string_view key) const {
    for (const auto& [k, v] : properties)
      if (k == key) return &v;
    return nullptr;
  }
};

struct SdfRecordError {
  std::size_t record_index = 0;  // 0-based position of the record in the input
  std::string message;
};

struct SdfParseResult {
  std::vector<SdfRecord> records;
  std::vector<SdfRecordError> errors;

  std::vector<MolecularGraph> molecules() const {
    std::vector<MolecularGraph> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.mol);
    return out;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::string_view column(std::string_view line, std::size_t begin, std::size_t width) {
  if (begin >= line.size()) return {};
  return line.substr(begin, width);
}

inline bool parse_int(std::string_view field, int& out) {
  auto t = std::string(trim(field));
  if (t.empty()) return false;
  char* end = nullptr;
  errno = 0;
  long v = std::strtol(t.c_str(), &end, 10);
  if (errno != 0 || end != t.c_str() + t.size()) return false;
  out = static_cast<int>(v);
  return true;
}

inline bool parse_double(std::string_view field, double& out) {
  auto t = std::string(trim(field));
  if (t.empty()) return false;
  char* end = nullptr;
  errno = 0;
  double v = std::strtod(t.c_str(), &end);
  if (errno != 0 || end != t.c_str() + t.size()) return false;
  out = v;
  return true;
}

inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string line(text.substr(pos, nl - pos));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    pos = nl + 1;
  }
  return lines;
}

inline SdfRecord parse_record(const std::vector<std::string>& block) {
  if (block.size() < 4) throw ParseError("malformed counts line: header block is truncated");
  const std::string_view counts = block[3];
  if (counts.find("V3000") != std::string_view::npos)
    throw ParseError("V3000 records are not supported");
  int natoms = 0, nbonds = 0;
  if (!parse_int(column(counts, 0, 3), natoms) || !parse_int(column(counts, 3, 3), nbonds) ||
      natoms < 0 || nbonds < 0)
    throw ParseError("malformed counts line");
  if (block.size() < 4 + static_cast<std::size_t>(natoms) + static_cast<std::size_t>(nbonds))
    throw ParseError("record truncated: fewer atom/bond lines than the counts line declares");

  std::vector<Atom> atoms;
  atoms.reserve(static_cast<std::size_t>(natoms));
  for (int i = 0; i < natoms; ++i) {
    std::string_view line = block[4 + static_cast<std::size_t>(i)];
    Atom a;
    if (!parse_double(column(line, 0, 10), a.pos.x()) ||
        !parse_double(column(line, 10, 10), a.pos.y()) ||
        !parse_double(column(line, 20, 10), a.pos.z()))
      throw ParseError("malformed coordinates on atom line " + std::to_string(i + 1));
    a.element = std::string(trim(column(line, 31, 3)));
    if (!is_known_symbol(a.element))
      throw ParseError("unknown element '" + a.element + "' on atom line " + std::to_string(i + 1));
    if (!a.pos.allFinite()) throw ParseError("non-finite coordinate on atom line " + std::to_string(i + 1));
    atoms.push_back(std::move(a));
  }

  std::vector<Bond> bonds;
  bonds.reserve(static_cast<std::size_t>(nbonds));
  for (int i = 0; i < nbonds; ++i) {
    std::string_view line = block[4 + static_cast<std::size_t>(natoms + i)];
    int a = 0, b = 0, type = 0;
    if (!parse_int(column(line, 0, 3), a) || !parse_int(column(line, 3, 3), b) ||
        !parse_int(column(line, 6, 3), type))
      throw ParseError("malformed bond line " + std::to_string(i + 1));
    if (a < 1 || b < 1 || a > natoms || b > natoms)
      throw ParseError("bond index out of range on bond line " + std::to_string(i + 1));
    if (type < 1 || type > 4)
      throw ParseError("unsupported bond type " + std::to_string(type) + " on bond line " +
                       std::to_string(i + 1));
    bonds.push_back({static_cast<std::size_t>(a - 1), static_cast<std::size_t>(b - 1),
                     static_cast<BondOrder>(type)});
  }

  SdfRecord rec;
  try {
    rec.mol = MolecularGraph(std::string(trim(block[0])), std::move(atoms), std::move(bonds));
  } catch (const Error& e) {
    throw ParseError(e.what());
  }

  // Properties block ends at "M  END"; data items follow.
  std::size_t i = 4 + static_cast<std::size_t>(natoms + nbonds);
  while (i < block.size() && block[i].rfind("M  END", 0) != 0) ++i;
  for (++i; i < block.size(); ++i) {
    std::string_view line = block[i];
    if (line.empty() || line[0] != '>') continue;
    auto lt = line.find('<'), gt = line.rfind('>');
    if (lt == std::string_view::npos || gt == std::string_view::npos || gt <= lt) continue;
    std::string key(line.substr(lt + 1, gt - lt - 1));
    std::string value;
    for (++i; i < block.size() && !trim(block[i]).empty(); ++i) {
      if (!value.empty()) value += '\n';
      value += block[i];
    }
    rec.properties.emplace_back(std::move(key), std::move(value));
  }
  return rec;
}

}  // namespace detail

// Parses MDL MOL/SDF V2000 text. Failures are reported per record; the other
// records are still returned.
inline SdfParseResult parse_sdf(std::string_view text) {
  SdfParseResult result;
  auto lines = detail::split_lines(text);
  std::vector<std::string> block;
  std::size_t index = 0;
  auto flush = [&](bool terminated) {
    bool blank = true;
    for (const auto& l : block)
      if (!detail::trim(l).empty()) blank = false;
    if (blank && !terminated) return;
    try {
      result.records.push_back(detail::parse_record(block));
    } catch (const Error& e) {
      result.errors.push_back({index, e.what()});
    }
    ++index;
    block.clear();
  };
  for (auto& line : lines) {
    if (detail::trim(line) == "$$$$") {
      flush(true);
      block.clear();
    } else {
      block.push_back(std::move(line));
    }
  }
  flush(false);
  return result;
}

// Emits one V2000 record terminated by "$$$$".
inline std::string write_sdf_record(const MolecularGraph& mol, const SdfProperties& props = {}) {
  if (mol.size() > 999 || mol.bonds().size() > 999)
    throw Error("V2000 supports at most 999 atoms and bonds");
  std::string out;
  char buf[128];
  out += mol.name();
  out += "\n  amdiff            3D\n\n";
  std::snprintf(buf, sizeof(buf), "%3zu%3zu  0  0  0  0  0  0  0  0999 V2000\n", mol.size(),
                mol.bonds().size());
  out += buf;
  for (const auto& a : mol.atoms()) {
    std::snprintf(buf, sizeof(buf), "%10.4f%10.4f%10.4f %-3s 0  0  0  0  0  0  0  0  0  0  0  0\n",
                  a.pos.x(), a.pos.y(), a.pos.z(), a.element.c_str());
    out += buf;
  }
  for (const auto& b : mol.bonds()) {
    std::snprintf(buf, sizeof(buf), "%3zu%3zu%3d  0  0  0  0\n", b.a + 1, b.b + 1, mdl_code(b.order));
    out += buf;
  }
  out += "M  END\n";
  for (const auto& [k, v] : props) {
    out += "> <" + k + ">\n" + v + "\n\n";
  }
  out += "$$$$\n";
  return out;
}

inline std::string write_sdf(const std::vector<MolecularGraph>& mols) {
  std::string out;
  for (const auto& m : mols) out += write_sdf_record(m);
  return out;
}

}  // namespace amdiff::molio
