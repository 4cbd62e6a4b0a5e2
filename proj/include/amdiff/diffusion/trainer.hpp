#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "amdiff/core/error.hpp"
#include "amdiff/denoiser/network.hpp"
#include "amdiff/denoiser/params.hpp"
#include "amdiff/diffusion/categorical.hpp"
#include "amdiff/diffusion/config.hpp"
#include "amdiff/diffusion/continuous.hpp"
#include "amdiff/diffusion/schedule.hpp"
#include "amdiff/diffusion/state.hpp"
#include "amdiff/molio/molecule.hpp"
#include "amdiff/molio/pdb.hpp"
#include "amdiff/motif/decompose.hpp"

namespace amdiff::diffusion {

// One ligand-pocket pair prepared for training.
struct TrainExample {
  std::string name;
  LigandState clean;
  Frame frame;
  denoiser::ConditionNodes cond;
};

// `view` must come from `mol` with IDs already assigned against a vocabulary
// of size `vocab`.
inline TrainExample make_example(const molio::MolecularGraph& mol, const motif::MotifView& view,
                                 const molio::PocketCloud& pocket, std::size_t vocab) {
  if (mol.empty()) throw DomainError("ligand has no atoms");
  if (view.motifs.empty()) throw DomainError("ligand has no motifs");
  TrainExample ex;
  ex.name = mol.name();
  ex.frame = pocket_frame(pocket);
  ex.cond = condition_nodes(pocket);
  ex.clean.atoms = ex.frame.to_normalized(mol.coords());
  for (const auto& a : mol.atoms()) ex.clean.types.push_back(a.type());
  ex.clean.motifs = ex.frame.to_normalized(view.centroids());
  for (const auto& m : view.motifs) ex.clean.ids.push_back(m.one_hot_index(vocab));
  return ex;
}

struct LossBreakdown {
  double a_pos = 0.0;
  double a_type = 0.0;
  double m_pos = 0.0;
  double m_id = 0.0;
  double total = 0.0;

  LossBreakdown& operator+=(const LossBreakdown& o) {
    a_pos += o.a_pos;
    a_type += o.a_type;
    m_pos += o.m_pos;
    m_id += o.m_id;
    total += o.total;
    return *this;
  }
  LossBreakdown& operator/=(double d) {
    a_pos /= d;
    a_type /= d;
    m_pos /= d;
    m_id /= d;
    total /= d;
    return *this;
  }
};

// A forward-process draw for one example.
struct Corruption {
  std::size_t t = 1;
  CoordMatrix eps_atoms;
  CoordMatrix eps_motifs;
  LigandState noisy;
  bool conditional = true;
};

template <class Rng>
CoordMatrix standard_normal(Eigen::Index rows, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  CoordMatrix m(rows, 3);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (int d = 0; d < 3; ++d) m(i, d) = n(rng);
  return m;
}

// Same t for both views.
template <class Rng>
Corruption corrupt(const TrainExample& ex, const DiffusionSchedule& s, std::size_t t, bool conditional, Rng& rng,
                   std::size_t n_types, std::size_t id_dim) {
  Corruption c;
  c.t = t;
  c.conditional = conditional;
  c.eps_atoms = standard_normal(ex.clean.atoms.rows(), rng);
  c.eps_motifs = standard_normal(ex.clean.motifs.rows(), rng);
  c.noisy.atoms = q_sample_pos(s, ex.clean.atoms, t, c.eps_atoms);
  c.noisy.motifs = q_sample_pos(s, ex.clean.motifs, t, c.eps_motifs);
  // A single class (empty vocabulary, only the out-of-vocabulary slot) has nothing to diffuse.
  for (auto v : ex.clean.types) c.noisy.types.push_back(n_types < 2 ? v : q_sample_type(s, v, n_types, t, rng));
  for (auto w : ex.clean.ids) c.noisy.ids.push_back(id_dim < 2 ? w : q_sample_type(s, w, id_dim, t, rng));
  return c;
}

namespace detail {

struct TypeTerm {
  double loss = 0.0;
  denoiser::RowMat grad;
};

// Mean KL between true and predicted categorical posteriors, with the
// gradient with respect to the logits.
inline TypeTerm type_term(const DiffusionSchedule& s, const std::vector<std::size_t>& v0,
                          const std::vector<std::size_t>& vt, const denoiser::RowMat& logits, std::size_t t,
                          double weight) {
  TypeTerm out;
  out.grad = denoiser::RowMat::Zero(logits.rows(), logits.cols());
  if (v0.empty() || logits.cols() < 2) return out;
  const auto K = static_cast<std::size_t>(logits.cols());
  const double inv_n = 1.0 / static_cast<double>(v0.size());
  for (std::size_t i = 0; i < v0.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const Prob vt_i = one_hot(K, vt[i]);
    const Prob q_true = posterior_type(s, vt_i, one_hot(K, v0[i]), t);
    const Eigen::VectorXd z = logits.row(r).transpose();
    out.loss += loss_type(q_true, posterior_type(s, vt_i, softmax(z), t)) * inv_n;
    if (weight != 0.0) out.grad.row(r) = weight * inv_n * loss_type_grad_logits(s, vt_i, q_true, z, t).transpose();
  }
  return out;
}

}  // namespace detail

// Joint loss of one corrupted example. When `grad` is given the parameter
// gradient of the total is added to it. Coordinates are predicted as noise,
// see noise_unit.
inline LossBreakdown example_loss(const TrainExample& ex, const Corruption& c, const denoiser::DenoiserParams& p,
                                  const DiffusionSchedule& s, const TrainConfig& cfg,
                                  denoiser::DenoiserParams* grad = nullptr) {
  const auto& dc = p.config();
  const auto assignment = nearest_motif(c.noisy.atoms, c.noisy.motifs);
  const auto g = state_graph(c.noisy, assignment, ex.cond, ex.frame, dc.n_types, dc.id_dim(), dc.k);
  denoiser::ForwardCache cache;
  const auto out = denoiser::forward(g, p, static_cast<int>(c.t), c.conditional, grad ? &cache : nullptr);

  const auto na = static_cast<Eigen::Index>(ex.clean.atoms.rows());
  const auto nm = static_cast<Eigen::Index>(ex.clean.motifs.rows());
  const double inv_scale = 1.0 / noise_unit(ex.frame, s, c.t);
  const CoordMatrix eps_a = out.displacement.topRows(na) * inv_scale;
  const CoordMatrix eps_m = out.displacement.middleRows(na, nm) * inv_scale;

  LossBreakdown L;
  L.a_pos = loss_pos(s, c.eps_atoms, eps_a, c.t, cfg.simple_loss);
  L.m_pos = loss_pos(s, c.eps_motifs, eps_m, c.t, cfg.simple_loss);
  auto at = detail::type_term(s, ex.clean.types, c.noisy.types, out.type_logits, c.t, grad ? cfg.lambda1 : 0.0);
  auto mt = detail::type_term(s, ex.clean.ids, c.noisy.ids, out.id_logits, c.t, grad ? cfg.lambda2 : 0.0);
  L.a_type = at.loss;
  L.m_id = mt.loss;
  L.total = L.a_pos + cfg.lambda1 * L.a_type + L.m_pos + cfg.lambda2 * L.m_id;
  if (!std::isfinite(L.total)) throw NumericError("non-finite loss");

  if (grad) {
    denoiser::OutputGrad go;
    go.displacement = CoordMatrix::Zero(static_cast<Eigen::Index>(g.size()), 3);
    go.displacement.topRows(na) = loss_pos_grad(s, c.eps_atoms, eps_a, c.t, cfg.simple_loss) * inv_scale;
    go.displacement.middleRows(na, nm) = loss_pos_grad(s, c.eps_motifs, eps_m, c.t, cfg.simple_loss) * inv_scale;
    go.type_logits = std::move(at.grad);
    go.id_logits = std::move(mt.grad);
    const auto gp = denoiser::backward(g, p, c.conditional, cache, go);
    auto& acc = grad->values();
    const auto& add = gp.values();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += add[i];
  }
  return L;
}

// Plain gradient descent by default; Adam on request.
class Optimizer {
public:
  Optimizer() = default;
  Optimizer(std::string kind, double lr) : kind_(std::move(kind)), lr_(lr) {}

  void set_learning_rate(double lr) { lr_ = lr; }

  void apply(denoiser::DenoiserParams& p, const denoiser::DenoiserParams& g) {
    auto& x = p.values();
    const auto& d = g.values();
    if (kind_ == "sgd") {
      for (std::size_t i = 0; i < x.size(); ++i) x[i] -= lr_ * d[i];
      return;
    }
    if (m_.size() != x.size()) {
      m_.assign(x.size(), 0.0);
      v_.assign(x.size(), 0.0);
    }
    ++step_;
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (std::size_t i = 0; i < x.size(); ++i) {
      m_[i] = b1 * m_[i] + (1.0 - b1) * d[i];
      v_[i] = b2 * v_[i] + (1.0 - b2) * d[i] * d[i];
      x[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps);
    }
  }

private:
  std::string kind_ = "sgd";
  double lr_ = 1e-3;
  std::vector<double> m_, v_;
  std::uint64_t step_ = 0;
};

// One optimization step over a batch: per example draw t, corrupt both views,
// drop the condition with probability p_uncond, accumulate the gradient of the
// joint loss, then update. Returns the batch-mean losses.
template <class Rng>
LossBreakdown train_step(const std::vector<const TrainExample*>& batch, denoiser::DenoiserParams& params,
                         Optimizer& opt, const TrainConfig& cfg, const DiffusionSchedule& s, Rng& rng) {
  if (batch.empty()) throw DomainError("empty batch");
  const auto& dc = params.config();
  if (dc.time_steps != s.T) throw ConfigError("model and schedule disagree on T");
  auto grad = params.zeros_like();
  LossBreakdown total;
  std::uniform_int_distribution<std::size_t> pick_t(1, s.T);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const std::size_t t = pick_t(rng);
    const bool conditional = !(u01(rng) < cfg.p_uncond);
    const auto c = corrupt(*batch[b], s, t, conditional, rng, dc.n_types, dc.id_dim());
    try {
      total += example_loss(*batch[b], c, params, s, cfg, &grad);
    } catch (const NumericError& e) {
      throw NumericError("batch item " + std::to_string(b) + ": " + e.what());
    }
  }
  const double nb = static_cast<double>(batch.size());
  total /= nb;
  auto& gv = grad.values();
  for (auto& v : gv) v /= nb;
  if (cfg.grad_clip > 0.0) {
    double norm2 = 0.0;
    for (double v : gv) norm2 += v * v;
    const double norm = std::sqrt(norm2);
    if (norm > cfg.grad_clip)
      for (auto& v : gv) v *= cfg.grad_clip / norm;
  }
  opt.apply(params, grad);
  if (!params.all_finite()) throw NumericError("parameters became non-finite");
  return total;
}

inline denoiser::DenoiserParams init_params(const TrainConfig& cfg, std::size_t vocab, std::mt19937_64& rng) {
  denoiser::DenoiserParams p(cfg.model.denoiser(vocab, cfg.schedule.T));
  p.initialize(rng);
  return p;
}

inline std::string loss_csv_header() { return "step,L_a_pos,L_a_type,L_m_pos,L_m_id,total\n"; }

inline std::string loss_csv_row(std::size_t step, const LossBreakdown& l) {
  std::ostringstream os;
  os.precision(10);
  os << step << ',' << l.a_pos << ',' << l.a_type << ',' << l.m_pos << ',' << l.m_id << ',' << l.total << '\n';
  return os.str();
}

// Training loop state. The master seed initializes the parameters and then
// drives every draw; batches cycle through the examples in order.
class Trainer {
public:
  Trainer(std::vector<TrainExample> data, TrainConfig cfg, std::size_t vocab)
      : data_(std::move(data)), cfg_(std::move(cfg)), schedule_(cfg_.schedule.build()), rng_(cfg_.seed) {
    cfg_.validate();
    if (data_.empty()) throw DomainError("no training examples");
    params_ = init_params(cfg_, vocab, rng_);
    opt_ = Optimizer(cfg_.optimizer, cfg_.learning_rate);
    build_eval_set();
  }

  LossBreakdown step() {
    std::vector<const TrainExample*> batch;
    for (std::size_t b = 0; b < cfg_.batch_size; ++b) batch.push_back(&data_[(cursor_++) % data_.size()]);
    if (cfg_.lr_schedule == "cosine" && cfg_.steps > 0) {
      const double frac = std::min(1.0, static_cast<double>(steps_) / static_cast<double>(cfg_.steps));
      opt_.set_learning_rate(cfg_.learning_rate * 0.5 * (1.0 + std::cos(M_PI * frac)));
    }
    auto l = train_step(batch, params_, opt_, cfg_, schedule_, rng_);
    ++steps_;
    return l;
  }

  // Loss over fixed draws: per example, stratified t with frozen noise, with
  // the condition present. Independent of the training RNG.
  LossBreakdown eval_loss() const {
    LossBreakdown total;
    for (const auto& [ex, c] : eval_) total += example_loss(data_[ex], c, params_, schedule_, cfg_);
    total /= static_cast<double>(eval_.size());
    return total;
  }

  const denoiser::DenoiserParams& params() const { return params_; }
  denoiser::DenoiserParams& params() { return params_; }
  const DiffusionSchedule& schedule() const { return schedule_; }
  const TrainConfig& config() const { return cfg_; }
  std::size_t steps_done() const { return steps_; }

private:
  void build_eval_set() {
    std::mt19937_64 rng(cfg_.seed ^ 0x9e3779b97f4a7c15ULL);
    const auto& dc = params_.config();
    const std::size_t J = cfg_.eval_draws;
    for (std::size_t e = 0; e < data_.size(); ++e)
      for (std::size_t j = 0; j < J; ++j) {
        auto t = static_cast<std::size_t>((static_cast<double>(j) + 0.5) * static_cast<double>(schedule_.T) /
                                          static_cast<double>(J)) + 1;
        t = std::min(t, schedule_.T);
        eval_.emplace_back(e, corrupt(data_[e], schedule_, t, true, rng, dc.n_types, dc.id_dim()));
      }
  }

  std::vector<TrainExample> data_;
  TrainConfig cfg_;
  DiffusionSchedule schedule_;
  std::mt19937_64 rng_;
  denoiser::DenoiserParams params_;
  Optimizer opt_;
  std::vector<std::pair<std::size_t, Corruption>> eval_;
  std::size_t cursor_ = 0;
  std::size_t steps_ = 0;
};

}  // namespace amdiff::diffusion
