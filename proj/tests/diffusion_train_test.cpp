#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "amdiff/diffusion/config.hpp"
#include "amdiff/diffusion/sampler.hpp"
#include "amdiff/diffusion/trainer.hpp"
#include "pairs.hpp"

namespace amdiff::diffusion {
namespace {

using testing::PairSet;

const PairSet& pairs() {
  static const PairSet p;
  return p;
}

TrainConfig small_config() {
  TrainConfig c;
  c.model.hidden = 16;
  c.model.layers = 2;
  c.model.k = 6;
  c.schedule.T = 20;
  c.schedule.kind = "cosine";
  c.steps = 10;
  c.eval_draws = 4;
  return c;
}

// Random parameters with every block nonzero, so positions actually move.
denoiser::DenoiserParams random_params(const TrainConfig& cfg, std::size_t vocab, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto p = init_params(cfg, vocab, rng);
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& v : p.values()) v = n(rng);
  return p;
}

TEST(TrainLoss, ZeroTypeWeightsLeavePositionTerms) {
  const auto& d = pairs();
  auto cfg = small_config();
  cfg.lambda1 = 0.0;
  cfg.lambda2 = 0.0;
  const auto p = random_params(cfg, d.vocab.size(), 3);
  const auto s = cfg.schedule.build();
  std::mt19937_64 rng(4);
  for (std::size_t t : {1, 7, 20}) {
    const auto c = corrupt(d.examples[1], s, t, true, rng, p.config().n_types, p.config().id_dim());
    const auto L = example_loss(d.examples[1], c, p, s, cfg);
    EXPECT_GT(L.a_type + L.m_id, 0.0);
    EXPECT_EQ(L.total, L.a_pos + L.m_pos);
  }
}

TEST(TrainLoss, TypeWeightsEnterLinearly) {
  const auto& d = pairs();
  auto cfg = small_config();
  const auto p = random_params(cfg, d.vocab.size(), 5);
  const auto s = cfg.schedule.build();
  std::mt19937_64 rng(6);
  const auto c = corrupt(d.examples[3], s, 9, true, rng, p.config().n_types, p.config().id_dim());
  cfg.lambda1 = 0.25;
  cfg.lambda2 = 3.0;
  const auto L = example_loss(d.examples[3], c, p, s, cfg);
  EXPECT_NEAR(L.total, L.a_pos + 0.25 * L.a_type + L.m_pos + 3.0 * L.m_id, 1e-12);
}

TEST(TrainLoss, GradientMatchesFiniteDifference) {
  const auto& d = pairs();
  auto cfg = small_config();
  cfg.model.k = 4;
  auto p = random_params(cfg, d.vocab.size(), 8);
  for (auto& v : p.values()) v *= 0.5;
  const auto s = cfg.schedule.build();
  std::mt19937_64 rng(9);
  const auto c = corrupt(d.examples[0], s, 6, true, rng, p.config().n_types, p.config().id_dim());
  auto grad = p.zeros_like();
  example_loss(d.examples[0], c, p, s, cfg, &grad);
  std::uniform_int_distribution<std::size_t> pick(0, p.values().size() - 1);
  const double h = 1e-5;
  for (int k = 0; k < 25; ++k) {
    const std::size_t i = pick(rng);
    auto hi = p, lo = p;
    hi.values()[i] += h;
    lo.values()[i] -= h;
    const double fd = (example_loss(d.examples[0], c, hi, s, cfg).total - example_loss(d.examples[0], c, lo, s, cfg).total) / (2 * h);
    EXPECT_NEAR(grad.values()[i], fd, 1e-5 + 1e-4 * std::abs(fd)) << "parameter " << i;
  }
}

TEST(TrainStep, SameSeedSameTrajectory) {
  const auto& d = pairs();
  auto cfg = small_config();
  cfg.batch_size = 2;
  cfg.seed = 11;
  auto run = [&] {
    Trainer tr(d.examples, cfg, d.vocab.size());
    std::vector<double> losses;
    for (int i = 0; i < 8; ++i) losses.push_back(tr.step().total);
    return std::make_pair(losses, tr.params().values());
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  cfg.seed = 12;
  Trainer other(d.examples, cfg, d.vocab.size());
  EXPECT_NE(other.step().total, a.first.front());
}

TEST(TrainStep, NonFiniteLossNamesBatchItem) {
  const auto& d = pairs();
  auto cfg = small_config();
  cfg.batch_size = 1;
  std::mt19937_64 rng(1);
  auto p = init_params(cfg, d.vocab.size(), rng);
  p.values()[0] = std::numeric_limits<double>::infinity();
  Optimizer opt(cfg.optimizer, cfg.learning_rate);
  const auto s = cfg.schedule.build();
  std::vector<const TrainExample*> batch{&d.examples[0]};
  try {
    train_step(batch, p, opt, cfg, s, rng);
    FAIL() << "expected a numeric error";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("batch item 0"), std::string::npos);
  }
}

TEST(TrainStep, SinglePairOverfitsIn500Steps) {
  const PairSet one(1);
  TrainConfig cfg;
  cfg.model.hidden = 32;
  cfg.model.layers = 2;
  cfg.model.k = 8;
  cfg.schedule.T = 1000;
  cfg.optimizer = "adam";
  cfg.learning_rate = 3e-3;
  cfg.lr_schedule = "cosine";
  cfg.grad_clip = 1.0;
  cfg.steps = 500;
  cfg.batch_size = 4;
  cfg.eval_draws = 32;
  cfg.seed = 1;
  Trainer tr(one.examples, cfg, one.vocab.size());
  const double start = tr.eval_loss().total;
  for (std::size_t i = 0; i < cfg.steps; ++i) tr.step();
  const double end = tr.eval_loss().total;
  EXPECT_LE(end, 0.1 * start) << "start " << start << " end " << end;
}

TEST(Config, StrictJson) {
  EXPECT_NO_THROW(train_config_from_json(nlohmann::json::object()));
  EXPECT_THROW(train_config_from_json({{"lambda3", 1.0}}), ConfigError);
  EXPECT_THROW(train_config_from_json({{"model", {{"width", 3}}}}), ConfigError);
  EXPECT_THROW(train_config_from_json({{"steps", "ten"}}), ConfigError);
  EXPECT_THROW(train_config_from_json({{"steps", -1}}), ConfigError);
  EXPECT_THROW(train_config_from_json({{"gamma", 1.5}}), ConfigError);
  EXPECT_THROW(train_config_from_json({{"optimizer", "rmsprop"}}), ConfigError);
  EXPECT_THROW(train_config_from_json({{"schedule", {{"kind", "sigmoid"}}}}), ConfigError);
  EXPECT_THROW(train_config_from_json({{"schedule", {{"snr_shift", 0.0}}}}), ConfigError);
  auto c = small_config();
  c.lambda1 = 0.3;
  c.schedule.snr_shift = 4.0;
  const auto back = train_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Schedule, SnrShiftScalesSignalToNoise) {
  const auto base = make_schedule(50, ScheduleKind::Cosine);
  const auto shifted = make_schedule(50, ScheduleKind::Cosine, 1e-4, 0.02, 3.0);
  for (std::size_t t = 1; t < 50; ++t) {
    const double snr0 = base.alpha_bar[t] / base.one_minus_alpha_bar[t];
    const double snr1 = shifted.alpha_bar[t] / shifted.one_minus_alpha_bar[t];
    EXPECT_NEAR(snr1 / snr0, 9.0, 1e-6 * 9.0) << t;
    EXPECT_NEAR(1.0 - shifted.alpha_bar[t], shifted.alpha[t] * (1.0 - shifted.alpha_bar[t - 1]) + shifted.beta[t], 1e-12);
  }
  EXPECT_TRUE(shifted.terminal_converged());
}

struct SamplerFixture : ::testing::Test {
  const PairSet& d = pairs();
  TrainConfig cfg = small_config();
  denoiser::DenoiserParams params = random_params(cfg, d.vocab.size(), 21);
  DiffusionSchedule s = cfg.schedule.build();

  SampleResult run(SampleOptions o, std::uint64_t seed = 5, const molio::PocketCloud* pocket = nullptr) {
    std::mt19937_64 rng(seed);
    return sample(pocket ? *pocket : d.pockets[4], 9, 2, params, s, o, rng);
  }
};

TEST_F(SamplerFixture, GuidanceOneMatchesConditionalOnly) {
  SampleOptions a;
  a.guidance = 1.0;
  a.snapshots = {20, 10, 0};
  SampleOptions b = a;
  b.conditional_only = true;
  const auto ra = run(a), rb = run(b);
  ASSERT_EQ(ra.snapshots.size(), 3u);
  for (std::size_t k = 0; k < ra.snapshots.size(); ++k) {
    EXPECT_EQ(ra.snapshots[k].atoms, rb.snapshots[k].atoms);
    EXPECT_EQ(ra.snapshots[k].motifs, rb.snapshots[k].motifs);
    EXPECT_EQ(ra.snapshots[k].types, rb.snapshots[k].types);
  }
  EXPECT_EQ(molio::write_sdf_record(ra.mol), molio::write_sdf_record(rb.mol));
  a.guidance = 2.0;
  EXPECT_NE(run(a).snapshots.back().atoms, ra.snapshots.back().atoms);
}

TEST_F(SamplerFixture, FullProjectionKeepsCentroidsOnAtomMeans) {
  SampleOptions o;
  o.gamma = 1.0;
  const auto r = run(o);
  ASSERT_EQ(r.trace.size(), s.T);
  for (const auto& st : r.trace) EXPECT_LE(st.centroid_gap, 1e-9) << "step " << st.t;
  EXPECT_GT(r.trace.front().motif_shift, 0.0);
  for (const auto& st : r.trace) EXPECT_EQ(st.atom_shift, 0.0);
}

TEST_F(SamplerFixture, ZeroGammaHasNoCouplingTerm) {
  SampleOptions off;
  off.projection = false;
  off.snapshots = {20, 15, 5, 0};
  SampleOptions zero = off;
  zero.projection = true;
  zero.gamma = 0.0;
  const auto a = run(off), b = run(zero);
  for (std::size_t k = 0; k < a.snapshots.size(); ++k) {
    EXPECT_EQ(a.snapshots[k].atoms, b.snapshots[k].atoms);
    EXPECT_EQ(a.snapshots[k].motifs, b.snapshots[k].motifs);
  }
  for (const auto& st : b.trace) {
    EXPECT_EQ(st.atom_shift, 0.0);
    EXPECT_EQ(st.motif_shift, 0.0);
  }
  // The views do drift apart without coupling, and any gamma > 0 changes the run.
  EXPECT_GT(b.trace.back().centroid_gap, 1e-6);
  SampleOptions half = off;
  half.projection = true;
  half.gamma = 0.5;
  EXPECT_NE(run(half).snapshots.back().atoms, a.snapshots.back().atoms);
}

TEST_F(SamplerFixture, RigidMotionOfPocketAndNoise) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 3; ++trial) {
    const auto m = testing::random_motion(rng);
    const auto moved = d.pockets[4].transformed(m);
    SampleOptions a;
    a.snapshots = {20, 12, 4, 0};
    SampleOptions b = a;
    b.noise_rotation = m.rotation;
    const auto ra = run(a, 40 + trial), rb = run(b, 40 + trial, &moved);
    ASSERT_EQ(ra.snapshots.size(), rb.snapshots.size());
    for (std::size_t k = 0; k < ra.snapshots.size(); ++k) {
      for (std::size_t i = 0; i < ra.snapshots[k].atoms.size(); ++i)
        EXPECT_LE((m.apply(ra.snapshots[k].atoms[i]) - rb.snapshots[k].atoms[i]).norm(), 1e-4)
            << "t " << ra.snapshots[k].t << " atom " << i;
      for (std::size_t i = 0; i < ra.snapshots[k].motifs.size(); ++i)
        EXPECT_LE((m.apply(ra.snapshots[k].motifs[i]) - rb.snapshots[k].motifs[i]).norm(), 1e-4);
      EXPECT_EQ(ra.snapshots[k].types, rb.snapshots[k].types);
    }
  }
}

TEST_F(SamplerFixture, SnapshotsAndResultShape) {
  SampleOptions o;
  o.snapshots = {0, 20, 7};
  const auto r = run(o);
  ASSERT_EQ(r.snapshots.size(), 3u);
  EXPECT_EQ(r.snapshots[0].t, 20u);
  EXPECT_EQ(r.snapshots[1].t, 7u);
  EXPECT_EQ(r.snapshots[2].t, 0u);
  EXPECT_EQ(r.mol.size(), 9u);
  EXPECT_EQ(r.snapshots[2].atoms, r.mol.coords());
  std::size_t members = 0;
  for (const auto& mo : r.view.motifs) members += mo.members.size();
  EXPECT_EQ(members, 9u);
  EXPECT_EQ(r.valid, r.violations.empty());
  EXPECT_EQ(r.valid, molio::check_validity(r.mol).valid);
}

TEST_F(SamplerFixture, RejectsBadSizes) {
  std::mt19937_64 rng(1);
  SampleOptions o;
  EXPECT_THROW(sample(d.pockets[0], 0, 1, params, s, o, rng), DomainError);
  EXPECT_THROW(sample(d.pockets[0], 3, 4, params, s, o, rng), DomainError);
  EXPECT_THROW(sample(d.pockets[0], 3, 1, params, make_schedule(7), o, rng), ConfigError);
}

TEST(SizeHistogramTest, DrawsOnlyObservedSizesAndRoundTrips) {
  SizeHistogram h;
  EXPECT_TRUE(h.empty());
  h.add(7, 2);
  h.add(7, 2);
  h.add(10, 3);
  std::mt19937_64 rng(2);
  int seven = 0;
  for (int i = 0; i < 3000; ++i) {
    const auto k = h.draw(rng);
    ASSERT_TRUE((k == std::pair<std::size_t, std::size_t>{7, 2} || k == std::pair<std::size_t, std::size_t>{10, 3}));
    seven += k.first == 7;
  }
  EXPECT_NEAR(seven / 3000.0, 2.0 / 3.0, 0.04);
  const auto back = SizeHistogram::from_json(h.to_json());
  EXPECT_EQ(back.counts(), h.counts());
  EXPECT_THROW(SizeHistogram().draw(rng), DomainError);
}

}  // namespace
}  // namespace amdiff::diffusion
