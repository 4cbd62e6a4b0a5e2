#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "amdiff/denoiser/checkpoint.hpp"
#include "amdiff/denoiser/graph.hpp"
#include "amdiff/denoiser/network.hpp"
#include "denoiser_fixtures.hpp"
#include "test_util.hpp"

namespace amdiff::denoiser {
namespace {

using amdiff::testing::one_hot;
using amdiff::testing::permuted;
using amdiff::testing::random_graph;
using amdiff::testing::small_config;

TEST(BuildGraph, OneNearestNeighbor) {
  std::vector<GraphNode> nodes(3);
  nodes[0].x = Vec3(0, 0, 0);
  nodes[1].x = Vec3(1, 0, 0);
  nodes[2].x = Vec3(5, 0, 0);
  auto g = connect(nodes, {}, 1);
  ASSERT_EQ(g.edges.size(), 3u);
  EXPECT_EQ(g.edges[0].j, 1u);
  EXPECT_EQ(g.edges[1].j, 0u);
  EXPECT_EQ(g.edges[2].j, 1u);
  EXPECT_FALSE(g.k_clamped);
}

TEST(BuildGraph, TieGoesToLowerIndex) {
  std::vector<GraphNode> nodes(3);
  nodes[0].x = Vec3(-1, 0, 0);
  nodes[1].x = Vec3(0, 0, 0);
  nodes[2].x = Vec3(1, 0, 0);
  auto g = connect(nodes, {}, 1);
  EXPECT_EQ(g.edges[1].i, 1u);
  EXPECT_EQ(g.edges[1].j, 0u);
}

TEST(BuildGraph, CrossViewEdgesIgnoreK) {
  LigandNodes lig;
  lig.x = {Vec3(0, 0, 0), Vec3(1.5, 0, 0)};
  lig.types = {one_hot(10, 0), one_hot(10, 0)};
  MotifNodes mot;
  mot.x = {Vec3(50, 0, 0)};
  mot.ids = {one_hot(1, 0)};
  mot.assignment = {0, 0};
  auto g = build_graph(lig, mot, {}, 1);
  std::size_t to_motif = 0, to_atom = 0;
  for (const auto& e : g.edges) {
    if (e.type == kEdgeAtomToMotif) {
      EXPECT_EQ(e.j, 2u);
      ++to_motif;
    }
    if (e.type == kEdgeMotifToAtom) ++to_atom;
  }
  EXPECT_EQ(to_motif, 2u);
  EXPECT_EQ(to_atom, 2u);
  // Kind-pair types on the k-NN edges.
  EXPECT_EQ(g.edges[0].type, edge_type(NodeKind::LigandAtom, NodeKind::LigandAtom));
  EXPECT_EQ(g.edges[2].type, edge_type(NodeKind::Motif, NodeKind::LigandAtom));
}

TEST(BuildGraph, ClampsKAndFlags) {
  std::vector<GraphNode> nodes(3);
  for (std::size_t i = 0; i < 3; ++i) nodes[i].x = Vec3(static_cast<double>(i), 0, 0);
  auto g = connect(nodes, {}, 10);
  EXPECT_TRUE(g.k_clamped);
  EXPECT_EQ(g.k, 2u);
  EXPECT_EQ(g.edges.size(), 6u);
  EXPECT_THROW(connect(nodes, {}, 0), DomainError);
  EXPECT_THROW(connect({GraphNode{}}, {}, 1), DomainError);
}

TEST(BuildGraph, ConditionNodesAreFixed) {
  std::mt19937_64 rng(3);
  auto cfg = small_config(8, 2);
  auto g = random_graph(rng, cfg, 5, 2, 6, 3);
  for (const auto& n : g.nodes) EXPECT_EQ(n.is_mutable, !is_condition(n.kind));
}

TEST(Forward, ZeroCoordinateLayerKeepsCoordinates) {
  std::mt19937_64 rng(5);
  auto cfg = small_config(16, 3);
  DenoiserParams p(cfg);
  p.initialize(rng);
  auto g = random_graph(rng, cfg, 6, 2, 8, 4);
  auto out = forward(g, p, 10, true);
  EXPECT_EQ(out.displacement.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(out.type_logits.rows(), 6);
  EXPECT_EQ(out.type_logits.cols(), 10);
  EXPECT_EQ(out.id_logits.rows(), 2);
  EXPECT_EQ(out.id_logits.cols(), 4);
}

TEST(Forward, RigidMotionEquivariance) {
  std::mt19937_64 rng(11);
  auto cfg = small_config(16, 3);
  DenoiserParams p(cfg);
  p.randomize(rng, 0.5);
  const std::size_t k = 4;
  auto g = random_graph(rng, cfg, 7, 3, 10, k);
  auto base = forward(g, p, 17, true);
  const CoordMatrix x0 = g.coords();
  for (int trial = 0; trial < 100; ++trial) {
    auto motion = amdiff::testing::random_motion(rng, 20.0);
    auto nodes = g.nodes;
    for (auto& n : nodes) n.x = motion.apply(n.x);
    std::vector<std::pair<std::size_t, std::size_t>> cross;
    for (const auto& e : g.edges)
      if (e.type == kEdgeAtomToMotif) cross.emplace_back(e.i, e.j);
    auto gm = connect(nodes, cross, k);
    auto out = forward(gm, p, 17, true);
    for (Eigen::Index i = 0; i < x0.rows(); ++i) {
      const Vec3 expect = motion.apply(Vec3(x0.row(i) + base.displacement.row(i)));
      const Vec3 got = gm.nodes[static_cast<std::size_t>(i)].x + out.displacement.row(i).transpose();
      EXPECT_LE((got - expect).norm(), 1e-5 * std::max(1.0, expect.norm())) << "node " << i;
    }
    for (Eigen::Index r = 0; r < base.type_logits.rows(); ++r)
      for (Eigen::Index c = 0; c < base.type_logits.cols(); ++c)
        EXPECT_LE(std::abs(out.type_logits(r, c) - base.type_logits(r, c)),
                  1e-5 * std::max(1.0, std::abs(base.type_logits(r, c))));
    for (Eigen::Index r = 0; r < base.id_logits.rows(); ++r)
      for (Eigen::Index c = 0; c < base.id_logits.cols(); ++c)
        EXPECT_LE(std::abs(out.id_logits(r, c) - base.id_logits(r, c)),
                  1e-5 * std::max(1.0, std::abs(base.id_logits(r, c))));
  }
}

TEST(Forward, PermutationEquivariance) {
  std::mt19937_64 rng(13);
  auto cfg = small_config(16, 3);
  DenoiserParams p(cfg);
  p.randomize(rng, 0.5);
  auto g = random_graph(rng, cfg, 6, 3, 7, 4);
  auto base = forward(g, p, 3, true);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> perm(g.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto gp = permuted(g, perm);
    auto out = forward(gp, p, 3, true);
    for (std::size_t k = 0; k < perm.size(); ++k)
      EXPECT_EQ(out.displacement.row(static_cast<Eigen::Index>(k)), base.displacement.row(static_cast<Eigen::Index>(perm[k])));
    // Logit rows follow the node order of each kind.
    for (std::size_t r = 0; r < out.atom_nodes.size(); ++r) {
      const auto old = perm[out.atom_nodes[r]];
      const auto br = std::find(base.atom_nodes.begin(), base.atom_nodes.end(), old) - base.atom_nodes.begin();
      EXPECT_EQ(out.type_logits.row(static_cast<Eigen::Index>(r)), base.type_logits.row(br));
    }
    for (std::size_t r = 0; r < out.motif_nodes.size(); ++r) {
      const auto old = perm[out.motif_nodes[r]];
      const auto br = std::find(base.motif_nodes.begin(), base.motif_nodes.end(), old) - base.motif_nodes.begin();
      EXPECT_EQ(out.id_logits.row(static_cast<Eigen::Index>(r)), base.id_logits.row(br));
    }
  }
}

TEST(Forward, ConditionCoordinatesNeverMove) {
  std::mt19937_64 rng(17);
  auto cfg = small_config(16, 3);
  DenoiserParams p(cfg);
  p.randomize(rng, 0.5);
  auto g = random_graph(rng, cfg, 5, 2, 9, 5);
  for (bool cond : {true, false}) {
    auto out = forward(g, p, 40, cond);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (is_condition(g.nodes[i].kind)) {
        EXPECT_EQ(out.displacement.row(static_cast<Eigen::Index>(i)).cwiseAbs().maxCoeff(), 0.0);
      }
  }
}

TEST(Forward, NullConditionChangesOutput) {
  std::mt19937_64 rng(19);
  auto cfg = small_config(16, 2);
  DenoiserParams p(cfg);
  p.initialize(rng);
  auto g = random_graph(rng, cfg, 5, 2, 9, 5);
  auto a = forward(g, p, 5, true);
  auto b = forward(g, p, 5, false);
  EXPECT_GT((a.type_logits - b.type_logits).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_GT((a.id_logits - b.id_logits).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Forward, GuardsTimeAndOverflow) {
  std::mt19937_64 rng(23);
  auto cfg = small_config(8, 2);
  DenoiserParams p(cfg);
  p.initialize(rng);
  auto g = random_graph(rng, cfg, 4, 2, 4, 3);
  EXPECT_THROW(forward(g, p, 0, true), DomainError);
  EXPECT_THROW(forward(g, p, 51, true), DomainError);
  p.randomize(rng, 1e200);
  try {
    forward(g, p, 5, true);
    FAIL() << "expected overflow";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer"), std::string::npos);
  }
}

using amdiff::testing::Probe;
using amdiff::testing::random_probe;

TEST(Backward, MatchesCentralDifferences) {
  // 6 nodes: 3 atoms, 1 motif, 2 pocket atoms; 2 layers.
  std::mt19937_64 rng(29);
  auto cfg = small_config(5, 2);
  const double h = 1e-4;
  for (int draw = 0; draw < 3; ++draw) {
    DenoiserParams p(cfg);
    p.randomize(rng, 0.8);
    auto g = random_graph(rng, cfg, 3, 1, 2, 3);
    ASSERT_EQ(g.size(), 6u);
    for (bool cond : {true, false}) {
      ForwardCache cache;
      auto out = forward(g, p, 7 + draw, cond, &cache);
      auto probe = random_probe(rng, g, out);
      auto grad = backward(g, p, cond, cache, probe.weights);
      for (const auto& blk : p.blocks()) {
        double num2 = 0.0, diff2 = 0.0;
        for (std::size_t k = 0; k < blk.size(); ++k) {
          const std::size_t idx = blk.offset + k;
          DenoiserParams q = p;
          q.values()[idx] = p.values()[idx] + h;
          const double up = probe.loss(forward(g, q, 7 + draw, cond));
          q.values()[idx] = p.values()[idx] - h;
          const double dn = probe.loss(forward(g, q, 7 + draw, cond));
          const double fd = (up - dn) / (2 * h);
          const double an = grad.values()[idx];
          num2 += fd * fd;
          diff2 += (fd - an) * (fd - an);
          EXPECT_LE(std::abs(fd - an), 1e-4 * std::max(1.0, std::abs(fd))) << blk.name << "[" << k << "]";
        }
        if (num2 > 0.0) {
          EXPECT_LE(std::sqrt(diff2 / num2), 1e-4) << blk.name;
        }
      }
    }
  }
}

TEST(Backward, ZeroUpstreamGivesZeroGradient) {
  std::mt19937_64 rng(31);
  auto cfg = small_config(8, 2);
  DenoiserParams p(cfg);
  p.randomize(rng, 0.5);
  auto g = random_graph(rng, cfg, 4, 2, 5, 3);
  ForwardCache cache;
  auto out = forward(g, p, 3, true, &cache);
  OutputGrad zero{CoordMatrix::Zero(out.displacement.rows(), 3), RowMat::Zero(out.type_logits.rows(), out.type_logits.cols()),
                  RowMat::Zero(out.id_logits.rows(), out.id_logits.cols())};
  auto grad = backward(g, p, true, cache, zero);
  for (double v : grad.values()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, DisconnectedCopyLeavesGradientsUnchanged) {
  std::mt19937_64 rng(37);
  auto cfg = small_config(8, 2);
  DenoiserParams p(cfg);
  p.randomize(rng, 0.5);
  auto g = random_graph(rng, cfg, 4, 2, 5, 3);
  ForwardCache cache;
  auto out = forward(g, p, 9, true, &cache);
  auto probe = random_probe(rng, g, out);
  auto ref = backward(g, p, true, cache, probe.weights);

  // Append two copies of a pocket node wired only to each other, far away.
  HeteroGraph big = g;
  const std::size_t a = big.size(), b = a + 1;
  auto copy = g.nodes.back();
  copy.x += Vec3(100, 0, 0);
  big.nodes.push_back(copy);
  copy.x += Vec3(1, 0, 0);
  big.nodes.push_back(copy);
  big.edges.push_back({a, b, edge_type(copy.kind, copy.kind)});
  big.edges.push_back({b, a, edge_type(copy.kind, copy.kind)});
  ForwardCache cache2;
  auto out2 = forward(big, p, 9, true, &cache2);
  OutputGrad w2 = probe.weights;
  w2.displacement.conservativeResize(static_cast<Eigen::Index>(big.size()), 3);
  w2.displacement.bottomRows(2).setZero();
  auto got = backward(big, p, true, cache2, w2);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(got.values()[i], ref.values()[i], 1e-12 * std::max(1.0, std::abs(ref.values()[i])));
  for (std::size_t i = 0; i < g.size(); ++i)
    EXPECT_EQ(out2.displacement.row(static_cast<Eigen::Index>(i)), out.displacement.row(static_cast<Eigen::Index>(i)));
}

TEST(Checkpoint, RoundTripStoresFloat32) {
  std::mt19937_64 rng(41);
  auto cfg = small_config(8, 2, 5);
  DenoiserParams p(cfg);
  p.randomize(rng, 1.0);
  auto bytes = encode_checkpoint(p, {{"note", "x"}});
  auto ck = decode_checkpoint(bytes);
  EXPECT_EQ(ck.metadata["note"], "x");
  EXPECT_EQ(ck.params.config().vocab, 5u);
  ASSERT_EQ(ck.params.size(), p.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    EXPECT_EQ(ck.params.values()[i], static_cast<double>(static_cast<float>(p.values()[i])));
  EXPECT_EQ(encode_checkpoint(ck.params, {{"note", "x"}}), bytes);
  // Header: magic, version 1, H=8, L=2, V=10, W=5, T=50.
  EXPECT_EQ(bytes.substr(0, 8), "AMDIFFCK");
  const unsigned char expect[] = {1, 0, 0, 0, 8, 0, 0, 0, 2, 0, 0, 0, 10, 0, 0, 0, 5, 0, 0, 0, 50, 0, 0, 0};
  for (std::size_t i = 0; i < sizeof(expect); ++i) EXPECT_EQ(static_cast<unsigned char>(bytes[8 + i]), expect[i]);
}

TEST(Checkpoint, RejectsDamage) {
  std::mt19937_64 rng(43);
  DenoiserParams p(small_config(4, 1));
  p.randomize(rng);
  auto bytes = encode_checkpoint(p);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 1)), ParseError);
  EXPECT_THROW(decode_checkpoint(bytes + "x"), ParseError);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), ParseError);
  bad = bytes;
  bad[8] = 2;
  EXPECT_THROW(decode_checkpoint(bad), ParseError);
  bad = bytes;
  bad[12] = 9;  // H disagrees with metadata
  EXPECT_THROW(decode_checkpoint(bad), ParseError);
}

}  // namespace
}  // namespace amdiff::denoiser
