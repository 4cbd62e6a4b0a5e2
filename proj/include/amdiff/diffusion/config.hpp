#pragma once

#include <cstdint>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "amdiff/core/error.hpp"
#include "amdiff/denoiser/params.hpp"
#include "amdiff/diffusion/schedule.hpp"

namespace amdiff::diffusion {

struct ScheduleConfig {
  std::size_t T = 1000;
  std::string kind = "linear";
  double beta_1 = 1e-4;
  double beta_T = 0.02;
  double snr_shift = 1.0;  // cosine only

  DiffusionSchedule build() const { return make_schedule(T, parse_schedule_kind(kind), beta_1, beta_T, snr_shift); }
};

struct ModelConfig {
  std::size_t hidden = 64;
  std::size_t layers = 4;
  std::size_t k = 8;
  std::size_t rbf = 16;
  std::size_t time_dim = 16;
  double rbf_cutoff = 10.0;

  denoiser::DenoiserConfig denoiser(std::size_t vocab, std::size_t T) const {
    denoiser::DenoiserConfig c;
    c.hidden = hidden;
    c.layers = layers;
    c.k = k;
    c.rbf = rbf;
    c.time_dim = time_dim;
    c.rbf_cutoff = rbf_cutoff;
    c.vocab = vocab;
    c.time_steps = T;
    return c;
  }
};

struct TrainConfig {
  ModelConfig model;
  ScheduleConfig schedule;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double p_uncond = 0.1;
  double learning_rate = 1e-3;
  std::string optimizer = "sgd";  // "sgd" (plain descent) or "adam"
  std::string lr_schedule = "constant";  // "constant" or "cosine" (decays to zero at `steps`)
  double grad_clip = 0.0;         // global-norm clip; 0 disables
  bool simple_loss = true;
  std::size_t steps = 500;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // 0: only at the end
  std::size_t eval_draws = 16;       // fixed (t, noise) draws per pair for the evaluation loss
  std::size_t min_freq = 1;          // vocabulary cutoff when none is supplied
  double guidance = 2.0;             // s at sampling
  double gamma = 0.5;                // consistency projection weight at sampling

  void validate() const {
    auto bad = [](const std::string& m) { throw ConfigError(m); };
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) bad("lambda1 and lambda2 must be >= 0");
    if (!(p_uncond >= 0.0 && p_uncond < 1.0)) bad("p_uncond must lie in [0, 1)");
    if (!(learning_rate > 0.0)) bad("learning_rate must be positive");
    if (optimizer != "sgd" && optimizer != "adam") bad("optimizer must be 'sgd' or 'adam'");
    if (lr_schedule != "constant" && lr_schedule != "cosine") bad("lr_schedule must be 'constant' or 'cosine'");
    if (!(grad_clip >= 0.0)) bad("grad_clip must be >= 0");
    if (batch_size < 1) bad("batch_size must be >= 1");
    if (eval_draws < 1) bad("eval_draws must be >= 1");
    if (min_freq < 1) bad("min_freq must be >= 1");
    if (!(guidance >= 0.0)) bad("guidance must be >= 0");
    if (!(gamma >= 0.0 && gamma <= 1.0)) bad("gamma must lie in [0, 1]");
    if (schedule.T < 1) bad("schedule.T must be >= 1");
    parse_schedule_kind(schedule.kind);
    if (!(schedule.beta_1 > 0.0 && schedule.beta_1 < 1.0 && schedule.beta_T > 0.0 && schedule.beta_T < 1.0))
      bad("betas must lie in (0, 1)");
    if (!(schedule.snr_shift > 0.0)) bad("schedule.snr_shift must be positive");
    model.denoiser(0, schedule.T).validate();
  }
};

namespace detail {

// Reads an object strictly: unknown keys and wrong types are config errors.
class StrictObject {
public:
  StrictObject(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(key, "a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(key, "a string");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(key, "a number");
    } else {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.template get<long long>() >= 0))
        fail(key, "a non-negative integer");
    }
    out = v.template get<T>();
  }

  const nlohmann::json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown key '" + k + "' in " + where_);
  }

private:
  [[noreturn]] void fail(const char* key, const char* want) const {
    throw ConfigError(where_ + "." + key + " must be " + want);
  }

  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"model",
           {{"hidden", c.model.hidden},
            {"layers", c.model.layers},
            {"k", c.model.k},
            {"rbf", c.model.rbf},
            {"time_dim", c.model.time_dim},
            {"rbf_cutoff", c.model.rbf_cutoff}}},
          {"schedule",
           {{"T", c.schedule.T}, {"kind", c.schedule.kind}, {"beta_1", c.schedule.beta_1}, {"beta_T", c.schedule.beta_T},
            {"snr_shift", c.schedule.snr_shift}}},
          {"lambda1", c.lambda1},
          {"lambda2", c.lambda2},
          {"p_uncond", c.p_uncond},
          {"learning_rate", c.learning_rate},
          {"optimizer", c.optimizer},
          {"lr_schedule", c.lr_schedule},
          {"grad_clip", c.grad_clip},
          {"simple_loss", c.simple_loss},
          {"steps", c.steps},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"checkpoint_every", c.checkpoint_every},
          {"eval_draws", c.eval_draws},
          {"min_freq", c.min_freq},
          {"guidance", c.guidance},
          {"gamma", c.gamma}};
}

// Missing keys keep their defaults.
inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  detail::StrictObject o(j, "config");
  if (const auto* m = o.child("model")) {
    detail::StrictObject mo(*m, "config.model");
    mo.get("hidden", c.model.hidden);
    mo.get("layers", c.model.layers);
    mo.get("k", c.model.k);
    mo.get("rbf", c.model.rbf);
    mo.get("time_dim", c.model.time_dim);
    mo.get("rbf_cutoff", c.model.rbf_cutoff);
    mo.finish();
  }
  if (const auto* s = o.child("schedule")) {
    detail::StrictObject so(*s, "config.schedule");
    so.get("T", c.schedule.T);
    so.get("kind", c.schedule.kind);
    so.get("beta_1", c.schedule.beta_1);
    so.get("beta_T", c.schedule.beta_T);
    so.get("snr_shift", c.schedule.snr_shift);
    so.finish();
  }
  o.get("lambda1", c.lambda1);
  o.get("lambda2", c.lambda2);
  o.get("p_uncond", c.p_uncond);
  o.get("learning_rate", c.learning_rate);
  o.get("optimizer", c.optimizer);
  o.get("lr_schedule", c.lr_schedule);
  o.get("grad_clip", c.grad_clip);
  o.get("simple_loss", c.simple_loss);
  o.get("steps", c.steps);
  o.get("batch_size", c.batch_size);
  o.get("seed", c.seed);
  o.get("checkpoint_every", c.checkpoint_every);
  o.get("eval_draws", c.eval_draws);
  o.get("min_freq", c.min_freq);
  o.get("guidance", c.guidance);
  o.get("gamma", c.gamma);
  o.finish();
  c.validate();
  return c;
}

}  // namespace amdiff::diffusion
