#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "amdiff/molio/bonds.hpp"
#include "amdiff/molio/canonical.hpp"
#include "amdiff/molio/pdb.hpp"
#include "amdiff/molio/rings.hpp"
#include "amdiff/molio/sdf.hpp"
#include "amdiff/molio/validity.hpp"
#include "test_util.hpp"

namespace amdiff::molio {
namespace {

using amdiff::testing::load_mol;

MolecularGraph permuted(const MolecularGraph& mol, const std::vector<std::size_t>& perm) {
  // new atom k is old atom perm[k]
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t k = 0; k < perm.size(); ++k) inv[perm[k]] = k;
  std::vector<Atom> atoms;
  for (auto p : perm) atoms.push_back(mol.atom(p));
  std::vector<Bond> bonds;
  for (const auto& b : mol.bonds()) bonds.push_back({inv[b.a], inv[b.b], b.order});
  return MolecularGraph(mol.name(), atoms, bonds);
}

std::set<std::pair<std::size_t, std::size_t>> bond_set(const std::vector<Bond>& bonds) {
  std::set<std::pair<std::size_t, std::size_t>> s;
  for (const auto& b : bonds) s.insert(std::minmax(b.a, b.b));
  return s;
}

MolecularGraph ring_of(const std::vector<std::string>& elements) {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;
  const std::size_t n = elements.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n);
    atoms.push_back({elements[i], Vec3(1.39 * std::cos(a), 1.39 * std::sin(a), 0.0)});
    bonds.push_back({i, (i + 1) % n, BondOrder::Aromatic});
  }
  return MolecularGraph("ring", atoms, bonds);
}

const char* kMethane = R"(methane
  test              3D

  5  4  0  0  0  0  0  0  0  0999 V2000
    0.0000    0.0000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
    0.6291    0.6291    0.6291 H   0  0  0  0  0  0  0  0  0  0  0  0
   -0.6291   -0.6291    0.6291 H   0  0  0  0  0  0  0  0  0  0  0  0
   -0.6291    0.6291   -0.6291 H   0  0  0  0  0  0  0  0  0  0  0  0
    0.6291   -0.6291   -0.6291 H   0  0  0  0  0  0  0  0  0  0  0  0
  1  2  1  0  0  0  0
  1  3  1  0  0  0  0
  1  4  1  0  0  0  0
  1  5  1  0  0  0  0
M  END
$$$$
)";

TEST(ParseSdf, MethaneRecord) {
  auto r = parse_sdf(kMethane);
  ASSERT_TRUE(r.errors.empty());
  ASSERT_EQ(r.records.size(), 1u);
  const auto& m = r.records[0].mol;
  EXPECT_EQ(m.name(), "methane");
  EXPECT_EQ(m.size(), 5u);
  ASSERT_EQ(m.bonds().size(), 4u);
  for (const auto& b : m.bonds()) EXPECT_EQ(b.order, BondOrder::Single);
  EXPECT_DOUBLE_EQ(m.atom(1).pos.x(), 0.6291);
  EXPECT_EQ(m.atom(0).element, "C");
}

TEST(ParseSdf, EmptyInput) {
  EXPECT_TRUE(parse_sdf("").records.empty());
  EXPECT_TRUE(parse_sdf("").errors.empty());
  EXPECT_TRUE(parse_sdf("\n\n").records.empty());
}

TEST(ParseSdf, BondIndexZeroIsRecordError) {
  std::string bad = kMethane;
  bad.replace(bad.find("  1  2  1"), 9, "  0  2  1");
  auto r = parse_sdf(bad + kMethane);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].record_index, 0u);
  EXPECT_NE(r.errors[0].message.find("bond index out of range"), std::string::npos);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].mol.size(), 5u);
}

TEST(ParseSdf, MalformedCountsAndUnknownElement) {
  std::string counts = kMethane;
  counts.replace(counts.find("  5  4"), 6, " x5  4");
  auto r1 = parse_sdf(counts);
  ASSERT_EQ(r1.errors.size(), 1u);
  EXPECT_NE(r1.errors[0].message.find("malformed counts line"), std::string::npos);

  std::string element = kMethane;
  element.replace(element.find(" C   0"), 6, " Qz  0");
  auto r2 = parse_sdf(element);
  ASSERT_EQ(r2.errors.size(), 1u);
  EXPECT_NE(r2.errors[0].message.find("unknown element"), std::string::npos);
}

TEST(ParseSdf, RejectsV3000) {
  auto r = parse_sdf("x\n  prog\n\n  0  0  0     0  0            999 V3000\nM  V30 BEGIN CTAB\nM  END\n$$$$\n");
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_NE(r.errors[0].message.find("V3000"), std::string::npos);
}

TEST(ParseSdf, ReadsDataItems) {
  auto text = write_sdf_record(load_mol("ethanol"), {{"valid", "1"}, {"seed", "42"}});
  auto r = parse_sdf(text);
  ASSERT_EQ(r.records.size(), 1u);
  ASSERT_NE(r.records[0].property("seed"), nullptr);
  EXPECT_EQ(*r.records[0].property("seed"), "42");
  EXPECT_EQ(*r.records[0].property("valid"), "1");
}

TEST(ParseSdf, RoundTripPreservesCountsAndCoordinates) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-99.0, 99.0);
  for (const char* name : {"toluene", "naphthalene", "methane_h", "acetone", "cyclopropylbenzene"}) {
    auto mol = load_mol(name);
    Coords xs;
    for (std::size_t i = 0; i < mol.size(); ++i) xs.emplace_back(u(rng), u(rng), u(rng));
    mol = mol.with_coords(xs);
    auto back = parse_sdf(write_sdf({mol, mol}));
    ASSERT_EQ(back.records.size(), 2u) << name;
    for (const auto& rec : back.records) {
      ASSERT_EQ(rec.mol.size(), mol.size());
      ASSERT_EQ(rec.mol.bonds().size(), mol.bonds().size());
      for (std::size_t i = 0; i < mol.size(); ++i) {
        EXPECT_EQ(rec.mol.atom(i).element, mol.atom(i).element);
        EXPECT_LE((rec.mol.atom(i).pos - mol.atom(i).pos).cwiseAbs().maxCoeff(), 5e-4);
      }
      for (std::size_t b = 0; b < mol.bonds().size(); ++b) {
        EXPECT_EQ(rec.mol.bonds()[b].a, mol.bonds()[b].a);
        EXPECT_EQ(rec.mol.bonds()[b].order, mol.bonds()[b].order);
      }
    }
  }
}

TEST(ParseSdf, WriterColumnLayout) {
  auto text = write_sdf_record(load_mol("ethanol"));
  auto lines = detail::split_lines(text);
  EXPECT_EQ(lines[3], "  3  2  0  0  0  0  0  0  0  0999 V2000");
  EXPECT_EQ(lines[4].size(), 69u);
  EXPECT_EQ(lines[4].substr(31, 3), "C  ");
  EXPECT_EQ(lines[7].substr(0, 9), "  1  2  1");
  EXPECT_EQ(lines.back(), "$$$$");
}

std::string pdb_line(int serial, const char* name, const char* res, int seq, double x, double y, double z,
                     const char* el) {
  char buf[100];
  std::snprintf(buf, sizeof(buf), "ATOM  %5d  %-3s %3s A%4d    %8.3f%8.3f%8.3f  1.00  0.00          %2s\n",
                serial, name, res, seq, x, y, z, el);
  return buf;
}

TEST(ParsePocketPdb, SelectsWithinRadius) {
  std::string pdb = pdb_line(1, "N", "ALA", 1, 1.0, 0.0, 0.0, "N") + pdb_line(2, "CA", "ALA", 1, 2.0, 1.0, 0.0, "C") +
                    pdb_line(3, "OG", "SER", 2, 0.0, 3.0, 4.0, "O");
  auto p = parse_pocket_pdb(pdb, Vec3::Zero(), 10.0);
  ASSERT_EQ(p.size(), 3u);
  EXPECT_LE((p.center - Vec3(1.0, 4.0 / 3.0, 4.0 / 3.0)).norm(), 1e-9);
  EXPECT_EQ(p.context.size(), 3u);

  auto near = parse_pocket_pdb(pdb, Vec3::Zero(), 2.0);
  EXPECT_EQ(near.size(), 1u);
  EXPECT_EQ(near.context.size(), 3u);
}

TEST(ParsePocketPdb, ResidueOneHotHasSingleBit) {
  std::string pdb = pdb_line(1, "N", "GLY", 1, 1.0, 0.0, 0.0, "N") + pdb_line(2, "CB", "TRP", 2, 0.0, 1.0, 0.0, "C");
  auto p = parse_pocket_pdb(pdb, Vec3::Zero(), 5.0);
  for (const auto& a : p.atoms) {
    auto f = a.features();
    ASSERT_EQ(static_cast<std::size_t>(f.size()), kPocketFeatureDim);
    EXPECT_DOUBLE_EQ(f.tail(static_cast<Eigen::Index>(kNumResidueTypes)).sum(), 1.0);
    EXPECT_DOUBLE_EQ(f.head(static_cast<Eigen::Index>(kNumAtomTypes)).sum(), 1.0);
  }
  EXPECT_EQ(p.atoms[0].features()(static_cast<Eigen::Index>(kNumAtomTypes + residue_index("GLY"))), 1.0);
  EXPECT_EQ(p.residue_labels()[1], "TRP A 2");
}

TEST(ParsePocketPdb, Errors) {
  std::string pdb = pdb_line(1, "N", "ALA", 1, 1.0, 0.0, 0.0, "N");
  EXPECT_THROW(parse_pocket_pdb(pdb, Vec3(50, 50, 50), 0.001), DomainError);
  EXPECT_THROW(parse_pocket_pdb("REMARK nothing\nEND\n", Vec3::Zero(), 10.0), DomainError);
  std::string broken = pdb;
  broken.replace(31, 6, "ab.cde");
  EXPECT_THROW(parse_pocket_pdb(broken, Vec3::Zero(), 10.0), ParseError);
  EXPECT_THROW(parse_pocket_pdb(pdb, Vec3::Zero(), 0.0), DomainError);
}

TEST(InferBonds, RadiusTableCases) {
  // 0.76 + 0.76 + 0.4 = 1.92 >= 1.54
  auto b = infer_bonds({Vec3(0, 0, 0), Vec3(1.54, 0, 0)}, {"C", "C"});
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0].order, BondOrder::Single);

  EXPECT_TRUE(infer_bonds({Vec3(0, 0, 0), Vec3(3.0, 0, 0)}, {"C", "C"}).empty());

  // 1.21 < 0.87 * (0.76 + 0.66) = 1.2354
  auto co = infer_bonds({Vec3(0, 0, 0), Vec3(1.21, 0, 0)}, {"C", "O"});
  ASSERT_EQ(co.size(), 1u);
  EXPECT_EQ(co[0].order, BondOrder::Double);

  // 1.25 > 1.2354: stays single
  EXPECT_EQ(infer_bonds({Vec3(0, 0, 0), Vec3(1.25, 0, 0)}, {"C", "O"})[0].order, BondOrder::Single);

  // C#N at 1.16 < 0.80 * 1.47
  EXPECT_EQ(infer_bonds({Vec3(0, 0, 0), Vec3(1.16, 0, 0)}, {"C", "N"})[0].order, BondOrder::Triple);
}

TEST(InferBonds, PromotionRespectsValence) {
  // Fluorine has no room for a second bond order.
  auto b = infer_bonds({Vec3(0, 0, 0), Vec3(1.10, 0, 0)}, {"C", "F"});
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0].order, BondOrder::Single);
}

TEST(InferBonds, RecoversFixtureConnectivity) {
  for (const char* name : {"toluene", "naphthalene", "butane", "cyclopropylbenzene", "acetone", "pyridine"}) {
    auto mol = load_mol(name);
    std::vector<std::string> el;
    for (const auto& a : mol.atoms()) el.push_back(a.element);
    EXPECT_EQ(bond_set(infer_bonds(mol.coords(), el)), bond_set(mol.bonds())) << name;
  }
}

TEST(InferBonds, SymmetricAndRigidInvariant) {
  std::mt19937_64 rng(11);
  for (const char* name : {"toluene", "naphthalene", "acetone", "methane_h"}) {
    auto mol = load_mol(name);
    std::vector<std::string> el;
    for (const auto& a : mol.atoms()) el.push_back(a.element);
    const auto base = infer_bonds(mol.coords(), el);

    // Reversing the atom order must give the same bond set under relabeling.
    const std::size_t n = mol.size();
    const auto xs = mol.coords();
    Coords rev(xs.rbegin(), xs.rend());
    std::vector<std::string> rel(el.rbegin(), el.rend());
    std::set<std::pair<std::size_t, std::size_t>> mapped;
    for (const auto& b : infer_bonds(rev, rel)) mapped.insert(std::minmax(n - 1 - b.a, n - 1 - b.b));
    EXPECT_EQ(mapped, bond_set(base)) << name;

    for (int k = 0; k < 5; ++k) {
      auto m = amdiff::testing::random_motion(rng, 20.0);
      auto moved = infer_bonds(m.apply(mol.coords()), el);
      ASSERT_EQ(moved.size(), base.size());
      for (std::size_t i = 0; i < base.size(); ++i) {
        EXPECT_EQ(moved[i].a, base[i].a);
        EXPECT_EQ(moved[i].b, base[i].b);
        EXPECT_EQ(moved[i].order, base[i].order);
      }
    }
  }
}

TEST(CheckValidity, Methane) {
  auto r = check_validity(parse_sdf(kMethane).records[0].mol);
  EXPECT_TRUE(r.valid);
  EXPECT_TRUE(r.violations.empty());
}

TEST(CheckValidity, PentavalentCarbon) {
  std::vector<Atom> atoms{{"C", Vec3::Zero()}};
  std::vector<Bond> bonds;
  const Vec3 dirs[5] = {{1.5, 0, 0}, {-1.5, 0, 0}, {0, 1.5, 0}, {0, -1.5, 0}, {0, 0, 1.5}};
  for (std::size_t i = 0; i < 5; ++i) {
    atoms.push_back({"C", dirs[i]});
    bonds.push_back({0, i + 1, BondOrder::Single});
  }
  auto r = check_validity(MolecularGraph("c5", atoms, bonds));
  EXPECT_FALSE(r.valid);
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_EQ(r.violations[0].rfind("valence 5 > 4 for C", 0), 0u);
}

TEST(CheckValidity, DisconnectedAndClash) {
  MolecularGraph two("two", {{"C", Vec3::Zero()}, {"C", Vec3(4, 0, 0)}}, {});
  auto r = check_validity(two);
  EXPECT_FALSE(r.valid);
  EXPECT_EQ(r.violations, std::vector<std::string>{"disconnected"});

  MolecularGraph clash("clash", {{"C", Vec3::Zero()}, {"O", Vec3(0.3, 0, 0)}}, {{0, 1, BondOrder::Single}});
  auto c = check_validity(clash);
  EXPECT_FALSE(c.valid);
  EXPECT_NE(c.violations[0].find("clash"), std::string::npos);

  EXPECT_FALSE(check_validity(MolecularGraph()).valid);
}

TEST(CheckValidity, AromaticFusionAtomsPass) {
  auto naph = load_mol("naphthalene");
  std::vector<Bond> arom;
  for (const auto& b : naph.bonds()) arom.push_back({b.a, b.b, BondOrder::Aromatic});
  EXPECT_TRUE(check_validity(MolecularGraph("n", naph.atoms(), arom)).valid);
  EXPECT_TRUE(check_validity(naph).valid);
}

TEST(CheckValidity, OrderIndependent) {
  std::mt19937_64 rng(5);
  for (const char* name : {"toluene", "acetone", "naphthalene"}) {
    auto mol = load_mol(name);
    std::vector<std::size_t> perm(mol.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (int k = 0; k < 10; ++k) {
      std::shuffle(perm.begin(), perm.end(), rng);
      EXPECT_EQ(check_validity(permuted(mol, perm)).valid, check_validity(mol).valid);
    }
  }
}

TEST(CanonicalHash, BenzeneOrientationAndPyridine) {
  auto cw = ring_of({"C", "C", "C", "C", "C", "C"});
  std::vector<std::size_t> ccw{0, 5, 4, 3, 2, 1};
  EXPECT_EQ(canonical_hash(cw), canonical_hash(permuted(cw, ccw)));

  auto pyr = ring_of({"N", "C", "C", "C", "C", "C"});
  // Exhaustive: every atom order gives one digest per molecule, and the two
  // digests differ.
  std::vector<std::size_t> perm{0, 1, 2, 3, 4, 5};
  std::set<std::uint64_t> benz, pyri;
  do {
    benz.insert(canonical_hash(permuted(cw, perm)));
    pyri.insert(canonical_hash(permuted(pyr, perm)));
  } while (std::next_permutation(perm.begin(), perm.end()));
  EXPECT_EQ(benz.size(), 1u);
  EXPECT_EQ(pyri.size(), 1u);
  EXPECT_NE(*benz.begin(), *pyri.begin());
}

TEST(CanonicalHash, SingleAtoms) {
  MolecularGraph c("c", {{"C", Vec3::Zero()}}, {});
  MolecularGraph n("n", {{"N", Vec3::Zero()}}, {});
  EXPECT_NE(canonical_hash(c), canonical_hash(n));
}

TEST(CanonicalHash, ExhaustivePermutationInvariance) {
  for (const char* name : {"toluene", "acetone", "cyclopropane", "butane", "pyridine", "ethanol"}) {
    auto mol = load_mol(name);
    ASSERT_LE(mol.size(), 7u);
    const auto ref = canonical_hash(mol);
    std::vector<std::size_t> perm(mol.size());
    std::iota(perm.begin(), perm.end(), 0);
    do {
      ASSERT_EQ(canonical_hash(permuted(mol, perm)), ref) << name;
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST(CanonicalHash, IgnoresCoordinatesButSeesBondOrder) {
  auto ac = load_mol("acetone");
  EXPECT_EQ(canonical_hash(ac), canonical_hash(ac.with_coords(Coords(ac.size(), Vec3::Zero()))));
  std::vector<Bond> single;
  for (const auto& b : ac.bonds()) single.push_back({b.a, b.b, BondOrder::Single});
  EXPECT_NE(canonical_hash(ac), canonical_hash(MolecularGraph("x", ac.atoms(), single)));
}

TEST(Rings, PerceptionOnFixtures) {
  auto naph = perceive_rings(load_mol("naphthalene"));
  EXPECT_EQ(naph.ring_count, 2u);
  EXPECT_EQ(naph.systems.size(), 1u);
  EXPECT_EQ(naph.systems[0].size(), 10u);

  auto cpb = load_mol("cyclopropylbenzene");
  auto info = perceive_rings(cpb);
  EXPECT_EQ(info.ring_count, 2u);
  EXPECT_EQ(info.systems.size(), 2u);
  std::multiset<std::size_t> sizes;
  for (std::size_t i = 0; i < cpb.size(); ++i) sizes.insert(smallest_ring_size(cpb, i));
  EXPECT_EQ(sizes.count(3), 3u);
  EXPECT_EQ(sizes.count(6), 6u);

  auto but = load_mol("butane");
  EXPECT_EQ(perceive_rings(but).ring_count, 0u);
  EXPECT_EQ(smallest_ring_size(but, 0), 0u);
}

}  // namespace
}  // namespace amdiff::molio
