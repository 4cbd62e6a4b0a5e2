#pragma once

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "amdiff/eval/angles.hpp"
#include "amdiff/eval/metrics.hpp"

namespace amdiff::eval {

struct MetricReport {
  SetMetrics set;
  std::map<std::string, double> angle_kl, dihedral_kl;
  std::vector<std::string> omitted_patterns;
  std::optional<std::pair<double, double>> rmsd_stats;  // mean, std
  std::size_t rmsd_pairs = 0;
  std::vector<std::pair<double, double>> npr_points;
};

struct ReportInputs {
  const std::vector<molio::MolecularGraph>* generated = nullptr;
  const std::vector<molio::MolecularGraph>* reference = nullptr;  // angle statistics
  std::set<std::uint64_t> train_scaffolds, test_scaffolds;
  std::vector<std::string> patterns = default_angle_patterns();
  AngleKlOptions angle_options;
  // Index-matched conformation pairs for the deviation statistic.
  std::vector<std::pair<Coords, Coords>> rmsd_pairs;
};

inline MetricReport build_report(const ReportInputs& in, std::vector<PatternKl>* details = nullptr) {
  if (!in.generated) throw DomainError("report needs a generated set");
  MetricReport r;
  r.set = set_metrics(*in.generated, in.train_scaffolds, in.test_scaffolds);
  std::vector<molio::MolecularGraph> valid;
  for (const auto& m : *in.generated)
    if (molio::check_validity(m).valid) valid.push_back(m);
  if (in.reference && !in.reference->empty() && !valid.empty()) {
    auto kl = angle_kl(*in.reference, valid, in.patterns, in.angle_options);
    r.angle_kl = std::move(kl.angle_kl);
    r.dihedral_kl = std::move(kl.dihedral_kl);
    r.omitted_patterns = std::move(kl.omitted);
    if (details) *details = std::move(kl.details);
  }
  for (const auto& m : valid) {
    if (m.size() < 3) continue;
    r.npr_points.push_back(npr_descriptors(m));
  }
  std::vector<double> dev;
  for (const auto& [a, b] : in.rmsd_pairs) dev.push_back(rmsd(a, b));
  r.rmsd_pairs = dev.size();
  if (!dev.empty()) r.rmsd_stats = mean_std(dev);
  return r;
}

namespace detail {
inline nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }
}  // namespace detail

inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j;
  j["validity"] = detail::opt(r.set.validity);
  j["uniqueness"] = detail::opt(r.set.uniqueness);
  j["diversity"] = detail::opt(r.set.diversity);
  j["novelty"] = detail::opt(r.set.novelty);
  j["angle_kl"] = r.angle_kl;
  j["dihedral_kl"] = r.dihedral_kl;
  j["omitted_patterns"] = r.omitted_patterns;
  j["rmsd_stats"] = r.rmsd_stats ? nlohmann::json{{"mean", r.rmsd_stats->first}, {"std", r.rmsd_stats->second}}
                                 : nlohmann::json(nullptr);
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& [a, b] : r.npr_points) pts.push_back({a, b});
  j["npr_points"] = pts;
  j["qed"] = "unavailable";
  j["sa"] = "unavailable";
  j["counts"] = {{"generated", r.set.generated}, {"valid", r.set.valid},          {"unique", r.set.unique},
                 {"scaffolds", r.set.scaffolds}, {"rmsd_pairs", r.rmsd_pairs}, {"npr", r.npr_points.size()}};
  return j;
}

// Flat metric,value table; absent values are written as empty cells.
inline std::string to_csv(const MetricReport& r) {
  std::ostringstream os;
  os.precision(12);
  auto row = [&](const std::string& k, const std::optional<double>& v) {
    os << k << ',';
    if (v) os << *v;
    os << '\n';
  };
  os << "metric,value\n";
  row("validity", r.set.validity);
  row("uniqueness", r.set.uniqueness);
  row("diversity", r.set.diversity);
  row("novelty", r.set.novelty);
  for (const auto& [k, v] : r.angle_kl) row("angle_kl:" + k, v);
  for (const auto& [k, v] : r.dihedral_kl) row("dihedral_kl:" + k, v);
  row("rmsd_mean", r.rmsd_stats ? std::optional<double>(r.rmsd_stats->first) : std::nullopt);
  row("rmsd_std", r.rmsd_stats ? std::optional<double>(r.rmsd_stats->second) : std::nullopt);
  row("count_generated", static_cast<double>(r.set.generated));
  row("count_valid", static_cast<double>(r.set.valid));
  row("count_unique", static_cast<double>(r.set.unique));
  row("count_npr", static_cast<double>(r.npr_points.size()));
  return os.str();
}

}  // namespace amdiff::eval
