#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "amdiff/core/error.hpp"
#include "amdiff/core/types.hpp"
#include "amdiff/denoiser/network.hpp"
#include "amdiff/denoiser/params.hpp"
#include "amdiff/diffusion/categorical.hpp"
#include "amdiff/diffusion/continuous.hpp"
#include "amdiff/diffusion/guidance.hpp"
#include "amdiff/diffusion/schedule.hpp"
#include "amdiff/diffusion/state.hpp"
#include "amdiff/diffusion/trainer.hpp"
#include "amdiff/molio/bonds.hpp"
#include "amdiff/molio/element.hpp"
#include "amdiff/molio/validity.hpp"
#include "amdiff/motif/decompose.hpp"

namespace amdiff::diffusion {

struct SampleOptions {
  double guidance = 2.0;
  double gamma = 0.5;
  bool conditional_only = false;  // never run the unconditional pass
  bool projection = true;         // consistency projection after each step (skipped when gamma = 0)
  std::vector<std::size_t> snapshots;  // steps t in [0, T] whose state x_t is recorded
  std::optional<Mat3> noise_rotation;  // every Gaussian draw is rotated by this matrix
  std::string name = "sample";
};

struct Snapshot {
  std::size_t t = 0;
  Coords atoms;   // Angstrom
  Coords motifs;  // Angstrom
  std::vector<std::size_t> types;
  std::vector<std::size_t> ids;
};

// Per reverse step, measured after the projection.
struct StepTrace {
  std::size_t t = 0;                // the step taken, x_t -> x_{t-1}
  double centroid_gap = 0.0;        // max |motif centroid - mean of its atoms|, Angstrom
  double atom_shift = 0.0;          // max atom displacement applied by the projection, Angstrom
  double motif_shift = 0.0;         // max centroid displacement applied by the projection, Angstrom
};

struct SampleResult {
  molio::MolecularGraph mol;
  motif::MotifView view;
  std::vector<Snapshot> snapshots;
  std::vector<StepTrace> trace;
  bool valid = false;
  std::vector<std::string> violations;
};

namespace detail {

template <class Rng>
CoordMatrix gaussian(Eigen::Index rows, const std::optional<Mat3>& rot, Rng& rng) {
  CoordMatrix z = standard_normal(rows, rng);
  if (rot) z = z * rot->transpose();
  return z;
}

inline double max_row_shift(const CoordMatrix& a, const CoordMatrix& b) {
  return a.rows() == 0 ? 0.0 : (a - b).rowwise().norm().maxCoeff();
}

template <class Rng>
std::size_t step_category(const DiffusionSchedule& s, std::size_t vt, const Prob& p0, std::size_t t, Rng& rng) {
  const auto K = static_cast<std::size_t>(p0.size());
  if (K < 2) return 0;
  return sample_categorical(posterior_type(s, one_hot(K, vt), p0, t), rng);
}

}  // namespace detail

// Reverse chain from pure noise to a molecule in the given pocket. Positions
// live in the pocket frame; each step combines conditional and unconditional
// predictions with guidance scale s, takes the Gaussian posterior step with
// the implied x_0 and the categorical posterior step with the predicted
// distributions, then applies the consistency projection.
template <class Rng>
SampleResult sample(const molio::PocketCloud& pocket, std::size_t n_atoms, std::size_t n_motifs,
                    const denoiser::DenoiserParams& params, const DiffusionSchedule& s, const SampleOptions& opt,
                    Rng& rng) {
  const auto& dc = params.config();
  if (dc.time_steps != s.T) throw ConfigError("checkpoint and schedule disagree on T");
  if (n_atoms < 1 || n_motifs < 1 || n_motifs > n_atoms) throw DomainError("need 1 <= n_motifs <= n_atoms");
  if (!(opt.gamma >= 0.0 && opt.gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (!(opt.guidance >= 0.0)) throw ConfigError("guidance must be >= 0");
  for (auto t : opt.snapshots)
    if (t > s.T) throw ConfigError("snapshot step " + std::to_string(t) + " beyond T");

  const Frame frame = pocket_frame(pocket);
  const auto cond = condition_nodes(pocket);
  const std::size_t V = dc.n_types, W1 = dc.id_dim();
  const auto na = static_cast<Eigen::Index>(n_atoms), nm = static_cast<Eigen::Index>(n_motifs);

  LigandState st;
  st.atoms = detail::gaussian(na, opt.noise_rotation, rng);
  st.motifs = detail::gaussian(nm, opt.noise_rotation, rng);
  std::uniform_int_distribution<std::size_t> uv(0, V - 1), uw(0, W1 - 1);
  for (std::size_t i = 0; i < n_atoms; ++i) st.types.push_back(uv(rng));
  for (std::size_t m = 0; m < n_motifs; ++m) st.ids.push_back(uw(rng));

  SampleResult res;
  auto record = [&](std::size_t t, const std::vector<std::size_t>& types) {
    if (std::find(opt.snapshots.begin(), opt.snapshots.end(), t) == opt.snapshots.end()) return;
    res.snapshots.push_back({t, frame.to_angstrom(st.atoms), frame.to_angstrom(st.motifs), types, st.ids});
  };
  record(s.T, st.types);

  std::vector<Prob> p_types(n_atoms), p_ids(n_motifs);
  std::vector<std::size_t> assignment;
  const bool run_uncond = !opt.conditional_only;
  const bool do_project = opt.projection && opt.gamma > 0.0;
  for (std::size_t t = s.T; t >= 1; --t) {
    assignment = nearest_motif(st.atoms, st.motifs);
    const auto g = state_graph(st, assignment, cond, frame, V, W1, dc.k);
    auto out = denoiser::forward(g, params, static_cast<int>(t), true);
    if (run_uncond) {
      const auto un = denoiser::forward(g, params, static_cast<int>(t), false);
      out.displacement = cfg_combine(out.displacement, un.displacement, opt.guidance);
      out.type_logits = cfg_combine(out.type_logits, un.type_logits, opt.guidance);
      out.id_logits = cfg_combine(out.id_logits, un.id_logits, opt.guidance);
    }
    const double unit = noise_unit(frame, s, t);
    const CoordMatrix eps_a = out.displacement.topRows(na) / unit;
    const CoordMatrix eps_m = out.displacement.middleRows(na, nm) / unit;
    CoordMatrix next_a = posterior_pos(s, st.atoms, predict_x0(s, st.atoms, eps_a, t), t).mean;
    CoordMatrix next_m = posterior_pos(s, st.motifs, predict_x0(s, st.motifs, eps_m, t), t).mean;
    if (t > 1) {
      const double sigma = std::sqrt(s.sigma2(t));
      next_a += sigma * detail::gaussian(na, opt.noise_rotation, rng);
      next_m += sigma * detail::gaussian(nm, opt.noise_rotation, rng);
    }
    for (std::size_t i = 0; i < n_atoms; ++i) {
      p_types[i] = softmax(out.type_logits.row(static_cast<Eigen::Index>(i)).transpose());
      st.types[i] = detail::step_category(s, st.types[i], p_types[i], t, rng);
    }
    for (std::size_t m = 0; m < n_motifs; ++m) {
      p_ids[m] = softmax(out.id_logits.row(static_cast<Eigen::Index>(m)).transpose());
      st.ids[m] = detail::step_category(s, st.ids[m], p_ids[m], t, rng);
    }

    StepTrace tr;
    tr.t = t;
    assignment = nearest_motif(next_a, next_m);
    if (do_project) {
      const CoordMatrix before_a = next_a, before_m = next_m;
      detail::project(next_a, next_m, assignment, opt.gamma);
      tr.atom_shift = detail::max_row_shift(next_a, before_a) * frame.scale;
      tr.motif_shift = detail::max_row_shift(next_m, before_m) * frame.scale;
    }
    st.atoms = std::move(next_a);
    st.motifs = std::move(next_m);
    tr.centroid_gap = detail::centroid_gap(st.atoms, st.motifs, assignment) * frame.scale;
    res.trace.push_back(tr);
    if (!st.atoms.allFinite() || !st.motifs.allFinite()) throw NumericError("sampler diverged at step " + std::to_string(t));
    if (t > 1) record(t - 1, st.types);
  }

  // Atoms decide the molecule; types are the most likely predicted classes.
  std::vector<std::size_t> types(n_atoms);
  std::vector<std::string> elements;
  for (std::size_t i = 0; i < n_atoms; ++i) {
    types[i] = argmax(p_types[i]);
    elements.push_back(molio::type_symbol(types[i]));
  }
  for (std::size_t m = 0; m < n_motifs; ++m) st.ids[m] = argmax(p_ids[m]);
  record(0, types);

  const Coords xs = frame.to_angstrom(st.atoms);
  res.mol = molio::bond_atoms(opt.name, xs, elements);
  const auto groups = detail::members_of(assignment, n_motifs);
  std::vector<std::size_t> motif_of(n_atoms);
  for (std::size_t m = 0; m < n_motifs; ++m) {
    if (groups[m].empty()) continue;
    motif::Motif mo;
    if (st.ids[m] < dc.vocab) mo.id = st.ids[m];
    mo.members = groups[m];
    mo.centroid = frame.point_to_angstrom(detail::cluster_mean(st.atoms, groups[m]));
    for (auto i : groups[m]) motif_of[i] = res.view.motifs.size();
    res.view.motifs.push_back(std::move(mo));
  }
  for (const auto& b : res.mol.bonds()) {
    const auto e = std::minmax(motif_of[b.a], motif_of[b.b]);
    if (e.first != e.second) res.view.edges.emplace_back(e.first, e.second);
  }
  std::sort(res.view.edges.begin(), res.view.edges.end());
  res.view.edges.erase(std::unique(res.view.edges.begin(), res.view.edges.end()), res.view.edges.end());

  const auto report = molio::check_validity(res.mol);
  res.valid = report.valid;
  res.violations = report.violations;
  return res;
}

// Empirical (n_atoms, n_motifs) distribution of a corpus.
class SizeHistogram {
public:
  void add(std::size_t n_atoms, std::size_t n_motifs) { ++counts_[{n_atoms, n_motifs}]; }
  bool empty() const { return counts_.empty(); }
  const std::map<std::pair<std::size_t, std::size_t>, std::size_t>& counts() const { return counts_; }

  template <class Rng>
  std::pair<std::size_t, std::size_t> draw(Rng& rng) const {
    if (counts_.empty()) throw DomainError("empty size histogram");
    std::size_t total = 0;
    for (const auto& [k, c] : counts_) total += c;
    std::size_t u = std::uniform_int_distribution<std::size_t>(0, total - 1)(rng);
    for (const auto& [k, c] : counts_) {
      if (u < c) return k;
      u -= c;
    }
    return counts_.rbegin()->first;
  }

  nlohmann::json to_json() const {
    auto j = nlohmann::json::array();
    for (const auto& [k, c] : counts_) j.push_back({k.first, k.second, c});
    return j;
  }
  static SizeHistogram from_json(const nlohmann::json& j) {
    SizeHistogram h;
    try {
      for (const auto& e : j) h.counts_[{e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()}] += e.at(2).get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("size histogram: ") + e.what());
    }
    return h;
  }

private:
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> counts_;
};

}  // namespace amdiff::diffusion
