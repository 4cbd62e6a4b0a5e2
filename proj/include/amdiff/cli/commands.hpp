#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "amdiff/cli/runtime.hpp"
#include "amdiff/denoiser/checkpoint.hpp"
#include "amdiff/diffusion/config.hpp"
#include "amdiff/diffusion/sampler.hpp"
#include "amdiff/diffusion/trainer.hpp"
#include "amdiff/eval/filters.hpp"
#include "amdiff/eval/report.hpp"
#include "amdiff/molio/pdb.hpp"
#include "amdiff/molio/sdf.hpp"
#include "amdiff/motif/vocabulary.hpp"
#include "amdiff/topo/fingerprint.hpp"

namespace amdiff::cli {

inline constexpr const char* kBundleFormat = "amdiff-bundle";
inline constexpr int kBundleVersion = 1;

// ---------------------------------------------------------------------------
// Dataset bundle

struct BundlePair {
  std::string name;
  molio::MolecularGraph ligand;  // heavy atoms
  molio::PocketCloud pocket;
};

struct Bundle {
  fs::path dir;
  nlohmann::json index;
  std::vector<BundlePair> pairs;
};

inline std::vector<double> to_array(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

// Pocket file written by ingest: every atom is a member, the frame radius is
// the extraction radius.
inline molio::PocketCloud pocket_from_extracted(std::string_view pdb_text, double radius) {
  auto atoms = molio::parse_pdb_atoms(pdb_text);
  if (atoms.empty()) throw ParseError("pocket file has no ATOM records");
  auto context = atoms;
  return molio::make_pocket(std::move(atoms), std::move(context), radius);
}

inline molio::MolecularGraph first_record(const fs::path& p) {
  auto parsed = molio::parse_sdf(read_file(p));
  if (parsed.records.empty()) throw ParseError("no readable SDF record in '" + p.string() + "'");
  return parsed.records.front().mol;
}

// Loads a bundle and checks every member file against its recorded digest.
inline Bundle load_bundle(const fs::path& dir, RunManifest* manifest = nullptr) {
  Bundle b;
  b.dir = dir;
  const fs::path index_path = dir / "bundle.json";
  b.index = read_json(index_path, false);
  if (manifest) manifest->add_input(index_path);
  try {
    if (b.index.at("format") != kBundleFormat || b.index.at("version") != kBundleVersion)
      throw ParseError("'" + index_path.string() + "' is not a version " + std::to_string(kBundleVersion) + " bundle");
    const double radius = b.index.at("radius").get<double>();
    for (const auto& e : b.index.at("pairs")) {
      BundlePair p;
      p.name = e.at("name").get<std::string>();
      const fs::path lig = dir / e.at("ligand").get<std::string>(), poc = dir / e.at("pocket").get<std::string>();
      const auto lig_text = read_file(lig), poc_text = read_file(poc);
      if (sha256_hex(lig_text) != e.at("ligand_sha256") || sha256_hex(poc_text) != e.at("pocket_sha256"))
        throw ParseError("bundle member of pair '" + p.name + "' does not match its digest");
      if (manifest) {
        manifest->add_input(lig.string(), lig_text);
        manifest->add_input(poc.string(), poc_text);
      }
      auto parsed = molio::parse_sdf(lig_text);
      if (parsed.records.empty()) throw ParseError("unreadable ligand in bundle pair '" + p.name + "'");
      p.ligand = parsed.records.front().mol.without_hydrogens();
      p.pocket = pocket_from_extracted(poc_text, radius);
      b.pairs.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed bundle index: " + std::string(e.what()));
  }
  if (b.pairs.empty()) throw EmptyResult("bundle '" + dir.string() + "' holds no pairs");
  return b;
}

// ---------------------------------------------------------------------------
// ingest

struct IngestOptions {
  fs::path ligand_dir, protein_dir, out_dir;
  double radius = 10.0;    // Angstrom
  double max_rmsd = 1.0;   // Angstrom, extra poses against the first pose
};

struct IngestSummary {
  std::size_t pairs = 0, skipped = 0;
  std::string digest;
};

// Pairs ligand X.sdf with protein X.pdb. The first record of a ligand file is
// the reference pose; later records are kept as extra pairs when their
// heavy-atom RMSD to it is within max_rmsd.
inline IngestSummary cmd_ingest(const IngestOptions& o, const Logger& log) {
  if (!(o.radius > 0.0)) throw ConfigError("--radius must be positive");
  if (!(o.max_rmsd >= 0.0)) throw ConfigError("--max-rmsd must be >= 0");
  const auto ligands = list_files(o.ligand_dir, ".sdf");
  if (!fs::is_directory(o.protein_dir)) throw IoError("not a directory: '" + o.protein_dir.string() + "'");
  DirectoryLock lock(o.out_dir);
  RunManifest man;
  man.command = "ingest";
  man.config = {{"radius", o.radius}, {"max_rmsd", o.max_rmsd}};

  nlohmann::json pairs = nlohmann::json::array();
  IngestSummary sum;
  auto skip = [&](const std::string& name, const std::string& why) {
    ++sum.skipped;
    log.warn("skip_pair", {{"pair", name}, {"reason", why}});
  };
  for (const auto& lig_path : ligands) {
    const std::string stem = lig_path.stem().string();
    const fs::path prot_path = o.protein_dir / (stem + ".pdb");
    if (!fs::is_regular_file(prot_path)) {
      skip(stem, "no protein file " + prot_path.filename().string());
      continue;
    }
    std::string lig_text, prot_text;
    try {
      lig_text = read_file(lig_path);
      prot_text = read_file(prot_path);
    } catch (const IoError& e) {
      skip(stem, e.what());
      continue;
    }
    man.add_input(lig_path.string(), lig_text);
    man.add_input(prot_path.string(), prot_text);
    const auto parsed = molio::parse_sdf(lig_text);
    if (parsed.records.empty() || (!parsed.errors.empty() && parsed.errors.front().record_index == 0)) {
      skip(stem, "unreadable ligand: " + (parsed.errors.empty() ? std::string("no records") : parsed.errors.front().message));
      continue;
    }
    for (const auto& e : parsed.errors)
      skip(stem + "_record" + std::to_string(e.record_index), "unreadable pose: " + e.message);
    const auto reference = parsed.records.front().mol.without_hydrogens();
    if (reference.empty()) {
      skip(stem, "ligand has no heavy atoms");
      continue;
    }
    const Vec3 center = centroid(reference.coords());
    molio::PocketCloud pocket;
    try {
      pocket = molio::parse_pocket_pdb(prot_text, center, o.radius);
    } catch (const Error& e) {
      skip(stem, std::string("unreadable protein: ") + e.what());
      continue;
    }
    const std::string pocket_pdb = molio::write_pdb(pocket.atoms);
    for (std::size_t k = 0; k < parsed.records.size(); ++k) {
      const auto& mol = parsed.records[k].mol;
      const std::string name = k == 0 ? stem : stem + "_pose" + std::to_string(k);
      if (k > 0) {
        const auto heavy = mol.without_hydrogens();
        if (heavy.size() != reference.size()) {
          skip(name, "pose atom count differs from the first pose");
          continue;
        }
        const double d = eval::rmsd(heavy.coords(), reference.coords());
        if (d > o.max_rmsd) {
          skip(name, "pose RMSD " + std::to_string(d) + " above cutoff");
          continue;
        }
      }
      const std::string lig_out = molio::write_sdf_record(mol.with_name(name));
      const std::string lig_rel = "ligands/" + name + ".sdf", poc_rel = "pockets/" + name + ".pdb";
      write_atomic(o.out_dir / lig_rel, lig_out);
      write_atomic(o.out_dir / poc_rel, pocket_pdb);
      pairs.push_back({{"name", name},
                       {"ligand", lig_rel},
                       {"pocket", poc_rel},
                       {"center", to_array(center)},
                       {"ligand_atoms", mol.without_hydrogens().size()},
                       {"pocket_atoms", pocket.size()},
                       {"ligand_sha256", sha256_hex(lig_out)},
                       {"pocket_sha256", sha256_hex(pocket_pdb)}});
    }
  }
  if (pairs.empty()) throw EmptyResult("ingest produced no pairs");
  nlohmann::json content{{"radius", o.radius}, {"max_rmsd", o.max_rmsd}, {"pairs", pairs}};
  sum.pairs = pairs.size();
  sum.digest = sha256_hex(content.dump());
  nlohmann::json index{{"format", kBundleFormat}, {"version", kBundleVersion}, {"digest", sum.digest}};
  for (auto& [k, v] : content.items()) index[k] = v;
  write_atomic(o.out_dir / "bundle.json", index.dump(2) + "\n");
  man.artifacts.push_back("bundle.json");
  for (const auto& p : pairs) {
    man.artifacts.push_back(p["ligand"]);
    man.artifacts.push_back(p["pocket"]);
  }
  man.write(o.out_dir);
  log.info("ingest_done", {{"pairs", sum.pairs}, {"skipped", sum.skipped}, {"digest", sum.digest}});
  return sum;
}

// ---------------------------------------------------------------------------
// Molecule sources

struct MoleculeSet {
  std::vector<molio::MolecularGraph> mols;
  std::vector<molio::SdfRecord> records;  // parsed records, in order
  std::size_t unparsed = 0;               // malformed records skipped
};

// Reads SDF files; a directory contributes its *.sdf files (recursively,
// sorted), a bundle directory its ligands. Hydrogens are dropped.
inline MoleculeSet read_molecules(const std::vector<fs::path>& sources, const Logger& log,
                                  RunManifest* manifest = nullptr) {
  std::vector<fs::path> files;
  for (const auto& s : sources) {
    if (fs::is_directory(s)) {
      const auto found = list_files(s, ".sdf", true);
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(s)) {
      files.push_back(s);
    } else {
      throw IoError("no such file or directory: '" + s.string() + "'");
    }
  }
  MoleculeSet out;
  for (const auto& f : files) {
    const auto text = read_file(f);
    if (manifest) manifest->add_input(f.string(), text);
    auto parsed = molio::parse_sdf(text);
    for (const auto& e : parsed.errors) {
      ++out.unparsed;
      log.warn("skip_record", {{"file", f.string()}, {"record", e.record_index}, {"reason", e.message}});
    }
    for (auto& r : parsed.records) {
      out.mols.push_back(r.mol.without_hydrogens());
      out.records.push_back(std::move(r));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// vocab

struct VocabOptions {
  std::vector<fs::path> inputs;
  fs::path out;
  std::size_t min_freq = 1;
};

inline motif::MotifVocabulary cmd_vocab(const VocabOptions& o, const Logger& log) {
  if (o.min_freq < 1) throw ConfigError("--min-freq must be >= 1");
  std::vector<fs::path> sources;
  for (const auto& in : o.inputs) sources.push_back(fs::is_regular_file(in / "bundle.json") ? in / "ligands" : in);
  const auto set = read_molecules(sources, log);
  if (set.mols.empty()) throw EmptyResult("no molecules to build a vocabulary from");
  auto vocab = motif::build_vocabulary(set.mols, o.min_freq);
  write_atomic(o.out, vocab.to_json().dump(2) + "\n");
  log.info("vocab_done", {{"molecules", set.mols.size()}, {"entries", vocab.size()}, {"out", o.out.string()}});
  return vocab;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  fs::path bundle, config, out_dir, vocab;  // config and vocab optional
  std::optional<std::size_t> steps;
  std::optional<std::uint64_t> seed;
};

inline diffusion::TrainConfig load_train_config(const fs::path& path) {
  if (path.empty()) return {};
  if (!fs::is_regular_file(path)) throw IoError("config file '" + path.string() + "' not found");
  return diffusion::train_config_from_json(read_json(path, true));
}

inline std::string checkpoint_bytes(const denoiser::DenoiserParams& p, const diffusion::TrainConfig& cfg,
                                    const diffusion::SizeHistogram& sizes, const std::string& vocab_sha,
                                    std::size_t step) {
  return denoiser::encode_checkpoint(
      p, {{"train", diffusion::to_json(cfg)}, {"sizes", sizes.to_json()}, {"vocab_sha256", vocab_sha}, {"step", step}});
}

struct TrainSummary {
  std::size_t steps = 0;
  double eval_initial = 0.0, eval_final = 0.0;
  fs::path checkpoint;
};

inline TrainSummary cmd_train(const TrainOptions& o, const Logger& log) {
  // The whole configuration is validated before any data is touched.
  auto cfg = load_train_config(o.config);
  if (o.steps) cfg.steps = *o.steps;
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();

  DirectoryLock lock(o.out_dir);
  RunManifest man;
  man.command = "train";
  man.config = diffusion::to_json(cfg);
  man.seed = cfg.seed;
  if (!o.config.empty()) man.add_input(o.config);
  const auto bundle = load_bundle(o.bundle, &man);

  motif::MotifVocabulary vocab;
  if (!o.vocab.empty()) {
    vocab = motif::MotifVocabulary::from_json(read_json(o.vocab, false));
    man.add_input(o.vocab);
  } else {
    std::vector<molio::MolecularGraph> ligands;
    for (const auto& p : bundle.pairs) ligands.push_back(p.ligand);
    vocab = motif::build_vocabulary(ligands, cfg.min_freq);
  }
  const std::string vocab_text = vocab.to_json().dump(2) + "\n";
  const std::string vocab_sha = sha256_hex(vocab_text);

  std::vector<diffusion::TrainExample> examples;
  diffusion::SizeHistogram sizes;
  for (const auto& p : bundle.pairs) {
    const auto view = motif::assign_ids(motif::decompose(p.ligand), vocab);
    examples.push_back(diffusion::make_example(p.ligand, view, p.pocket, vocab.size()));
    sizes.add(p.ligand.size(), view.motifs.size());
  }

  log.info("train_start", {{"pairs", examples.size()}, {"vocab", vocab.size()}, {"steps", cfg.steps}, {"seed", cfg.seed}});
  diffusion::Trainer trainer(std::move(examples), cfg, vocab.size());
  std::string loss_csv = diffusion::loss_csv_header();
  std::string eval_csv = diffusion::loss_csv_header();
  TrainSummary sum;
  const auto e0 = trainer.eval_loss();
  sum.eval_initial = sum.eval_final = e0.total;
  eval_csv += diffusion::loss_csv_row(0, e0);
  const std::size_t report_every = std::max<std::size_t>(1, cfg.steps / 20);
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    const auto l = trainer.step();
    loss_csv += diffusion::loss_csv_row(step, l);
    const bool ck = cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && step < cfg.steps;
    if (ck) {
      const std::string rel = "checkpoints/step_" + std::to_string(step) + ".bin";
      write_atomic(o.out_dir / rel, checkpoint_bytes(trainer.params(), cfg, sizes, vocab_sha, step));
      man.artifacts.push_back(rel);
    }
    if (ck || step == cfg.steps) {
      const auto e = trainer.eval_loss();
      eval_csv += diffusion::loss_csv_row(step, e);
      sum.eval_final = e.total;
    }
    if (step % report_every == 0) log.info("train_progress", {{"step", step}, {"loss", l.total}});
  }
  sum.steps = cfg.steps;
  sum.checkpoint = o.out_dir / "checkpoint.bin";
  write_atomic(sum.checkpoint, checkpoint_bytes(trainer.params(), cfg, sizes, vocab_sha, cfg.steps));
  write_atomic(o.out_dir / "loss.csv", loss_csv);
  write_atomic(o.out_dir / "eval_loss.csv", eval_csv);
  write_atomic(o.out_dir / "vocab.json", vocab_text);
  for (const char* a : {"checkpoint.bin", "loss.csv", "eval_loss.csv", "vocab.json"}) man.artifacts.push_back(a);
  man.write(o.out_dir);
  log.info("train_done", {{"steps", sum.steps}, {"eval_initial", sum.eval_initial}, {"eval_final", sum.eval_final}});
  return sum;
}

// ---------------------------------------------------------------------------
// sample

struct SampleCliOptions {
  fs::path checkpoint, pocket, ligand, out_dir;
  double radius = 10.0;  // frame radius; extraction radius when a ligand is given
  std::size_t n = 10;
  std::optional<double> scale, gamma;  // default to the checkpoint's training config
  bool conditional_only = false;
  std::vector<std::size_t> snapshots;
  std::uint64_t seed = 0;
  std::size_t atoms = 0, motifs = 0;  // 0: drawn from the training size distribution
};

inline std::uint64_t chain_seed(std::uint64_t master, std::size_t chain) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(chain) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline molio::MolecularGraph snapshot_molecule(const diffusion::Snapshot& s, const std::string& name) {
  std::vector<molio::Atom> atoms;
  for (std::size_t i = 0; i < s.atoms.size(); ++i) atoms.push_back({molio::type_symbol(s.types[i]), s.atoms[i]});
  return molio::MolecularGraph(name, std::move(atoms), {});
}

struct SampleSummary {
  std::size_t generated = 0, valid = 0;
  fs::path sdf;
};

inline SampleSummary cmd_sample(const SampleCliOptions& o, const Logger& log) {
  if (o.n < 1) throw ConfigError("--n must be >= 1");
  if (!(o.radius > 0.0)) throw ConfigError("--radius must be positive");
  if ((o.atoms == 0) != (o.motifs == 0)) throw ConfigError("--atoms and --motifs go together");
  if (o.atoms > 0 && o.motifs > o.atoms) throw ConfigError("--motifs must not exceed --atoms");
  const std::size_t workers = worker_count();

  DirectoryLock lock(o.out_dir);
  RunManifest man;
  man.command = "sample";
  man.seed = o.seed;
  const auto ck_bytes = read_file(o.checkpoint);
  man.add_input(o.checkpoint.string(), ck_bytes);
  const auto ck = denoiser::decode_checkpoint(ck_bytes);
  if (!ck.metadata.contains("train")) throw ParseError("checkpoint lacks its training config");
  const auto cfg = diffusion::train_config_from_json(ck.metadata["train"]);
  const auto schedule = cfg.schedule.build();
  if (ck.params.config().time_steps != schedule.T)
    throw ConfigError("checkpoint model expects T=" + std::to_string(ck.params.config().time_steps) +
                      " but its schedule has T=" + std::to_string(schedule.T));
  diffusion::SizeHistogram sizes;
  if (ck.metadata.contains("sizes")) sizes = diffusion::SizeHistogram::from_json(ck.metadata["sizes"]);
  if (o.atoms == 0 && sizes.empty()) throw ConfigError("checkpoint has no size distribution; pass --atoms and --motifs");

  const auto pocket_text = read_file(o.pocket);
  man.add_input(o.pocket.string(), pocket_text);
  molio::PocketCloud pocket;
  if (!o.ligand.empty()) {
    const auto lig_text = read_file(o.ligand);
    man.add_input(o.ligand.string(), lig_text);
    auto parsed = molio::parse_sdf(lig_text);
    if (parsed.records.empty()) throw ParseError("no readable ligand in '" + o.ligand.string() + "'");
    pocket = molio::parse_pocket_pdb(pocket_text, centroid(parsed.records.front().mol.without_hydrogens().coords()), o.radius);
  } else {
    pocket = pocket_from_extracted(pocket_text, o.radius);
  }

  diffusion::SampleOptions so;
  so.guidance = o.scale.value_or(cfg.guidance);
  so.gamma = o.gamma.value_or(cfg.gamma);
  so.conditional_only = o.conditional_only;
  so.snapshots = o.snapshots;
  for (auto t : so.snapshots)
    if (t > schedule.T) throw ConfigError("snapshot step " + std::to_string(t) + " beyond T=" + std::to_string(schedule.T));
  man.config = {{"n", o.n},           {"scale", so.guidance}, {"gamma", so.gamma}, {"conditional_only", so.conditional_only},
                {"snapshots", o.snapshots}, {"radius", o.radius}, {"atoms", o.atoms}, {"motifs", o.motifs}};

  struct Chain {
    std::uint64_t seed = 0;
    diffusion::SampleResult result;
  };
  std::vector<Chain> chains(o.n);
  log.info("sample_start", {{"n", o.n}, {"workers", workers}, {"scale", so.guidance}, {"gamma", so.gamma}});
  parallel_for(o.n, workers, [&](std::size_t i) {
    chains[i].seed = chain_seed(o.seed, i);
    std::mt19937_64 rng(chains[i].seed);
    auto [na, nm] = o.atoms > 0 ? std::pair{o.atoms, o.motifs} : sizes.draw(rng);
    auto opt = so;
    opt.name = "sample_" + std::to_string(i);
    chains[i].result = diffusion::sample(pocket, na, nm, ck.params, schedule, opt, rng);
  });

  SampleSummary sum;
  std::string sdf;
  for (std::size_t i = 0; i < o.n; ++i) {
    const auto& r = chains[i].result;
    molio::SdfProperties props{{"amdiff_valid", r.valid ? "1" : "0"},
                               {"amdiff_seed", std::to_string(chains[i].seed)},
                               {"amdiff_chain", std::to_string(i)}};
    if (!r.violations.empty()) {
      std::string v;
      for (const auto& s : r.violations) v += (v.empty() ? "" : "; ") + s;
      props.emplace_back("amdiff_violations", v);
    }
    sdf += molio::write_sdf_record(r.mol, props);
    sum.valid += r.valid;
    for (const auto& snap : r.snapshots) {
      const std::string rel = "snapshots/chain_" + std::to_string(i) + "_t" + std::to_string(snap.t) + ".sdf";
      write_atomic(o.out_dir / rel,
                   molio::write_sdf_record(snapshot_molecule(snap, r.mol.name() + "_t" + std::to_string(snap.t)),
                                           {{"amdiff_t", std::to_string(snap.t)}}));
      man.artifacts.push_back(rel);
    }
  }
  sum.generated = o.n;
  sum.sdf = o.out_dir / "samples.sdf";
  write_atomic(sum.sdf, sdf);
  man.artifacts.insert(man.artifacts.begin(), "samples.sdf");
  man.write(o.out_dir);
  log.info("sample_done", {{"generated", sum.generated}, {"valid", sum.valid}});
  return sum;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  fs::path generated, out_dir, rules, rmsd_reference;  // rules and rmsd_reference optional
  std::vector<fs::path> references;
  std::vector<std::string> patterns = eval::default_angle_patterns();
  eval::AngleKlOptions angle;
};

inline std::string histogram_file_name(std::size_t k, const std::string& pattern) {
  std::string s;
  for (char c : pattern) s += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return "histograms/" + std::to_string(k) + "_" + s + ".csv";
}

struct EvalSummary {
  eval::MetricReport report;
  std::size_t unparsed = 0;
  std::optional<eval::FilterOutcome> filter;
  ExitCode code = ExitCode::Ok;
};

inline EvalSummary cmd_eval(const EvalOptions& o, const Logger& log) {
  std::optional<eval::FilterRules> rules;
  if (!o.rules.empty()) rules = eval::rules_from_json(read_json(o.rules, true));
  for (const auto& p : o.patterns) eval::parse_linear_pattern(p);

  DirectoryLock lock(o.out_dir);
  RunManifest man;
  man.command = "eval";
  man.config = {{"patterns", o.patterns},
                {"angle_bin", o.angle.angle_bin},
                {"dihedral_bin", o.angle.dihedral_bin},
                {"smoothing", o.angle.smoothing}};
  if (rules) man.add_input(o.rules);

  const auto gen = read_molecules({o.generated}, log, &man);
  const auto ref = o.references.empty() ? MoleculeSet{} : read_molecules(o.references, log, &man);
  if (rules && rules->needs_reference() && ref.mols.empty()) throw ConfigError("similarity rule needs --reference");

  eval::ReportInputs in;
  in.generated = &gen.mols;
  in.reference = &ref.mols;
  in.train_scaffolds = eval::scaffold_hashes(ref.mols);
  in.patterns = o.patterns;
  in.angle_options = o.angle;
  if (!o.rmsd_reference.empty()) {
    const auto rr = read_molecules({o.rmsd_reference}, log, &man);
    const std::size_t n = std::min(rr.mols.size(), gen.mols.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (rr.mols[i].size() != gen.mols[i].size() || gen.mols[i].empty()) {
        log.warn("rmsd_pair_skipped", {{"index", i}, {"reason", "atom counts differ"}});
        continue;
      }
      in.rmsd_pairs.emplace_back(gen.mols[i].coords(), rr.mols[i].coords());
    }
  }

  EvalSummary sum;
  sum.unparsed = gen.unparsed;
  std::vector<eval::PatternKl> details;
  sum.report = eval::build_report(in, &details);
  auto j = eval::to_json(sum.report);
  j["unparsed"] = gen.unparsed;
  j["counts"]["reference"] = ref.mols.size();

  if (rules) {
    sum.filter = eval::filter_pipeline(gen.mols, *rules, ref.mols);
    std::string passed, rejected = "index,name,reason\n";
    for (auto i : sum.filter->passed) passed += molio::write_sdf_record(gen.records[i].mol, gen.records[i].properties);
    for (const auto& [i, why] : sum.filter->rejected) {
      std::string reason = why;
      std::replace(reason.begin(), reason.end(), ',', ';');
      rejected += std::to_string(i) + ',' + gen.mols[i].name() + ',' + reason + '\n';
    }
    write_atomic(o.out_dir / "filter_passed.sdf", passed);
    write_atomic(o.out_dir / "filter_rejected.csv", rejected);
    man.artifacts.push_back("filter_passed.sdf");
    man.artifacts.push_back("filter_rejected.csv");
    j["filter"] = {{"passed", sum.filter->passed.size()}, {"rejected", sum.filter->rejected.size()}};
  }

  for (std::size_t k = 0; k < details.size(); ++k) {
    if (!details[k].kl) continue;
    const auto rel = histogram_file_name(k, details[k].pattern);
    write_atomic(o.out_dir / rel, eval::histogram_csv(details[k]));
    man.artifacts.push_back(rel);
  }
  std::string csv = eval::to_csv(sum.report);
  csv += "unparsed," + std::to_string(gen.unparsed) + "\n";
  write_atomic(o.out_dir / "report.json", j.dump(2) + "\n");
  write_atomic(o.out_dir / "report.csv", csv);
  man.artifacts.insert(man.artifacts.begin(), {"report.json", "report.csv"});
  man.write(o.out_dir);
  if (gen.mols.empty()) {
    log.warn("eval_empty", {{"unparsed", gen.unparsed}});
    sum.code = ExitCode::Empty;
  } else {
    log.info("eval_done", {{"generated", gen.mols.size()}, {"valid", sum.report.set.valid}, {"unparsed", gen.unparsed}});
  }
  return sum;
}

// ---------------------------------------------------------------------------
// fingerprint

struct FingerprintOptions {
  std::vector<fs::path> inputs;  // .sdf (one entry per record) or .pdb (all atoms)
  fs::path out, diagram_dir;     // both optional; JSON goes to stdout without --out
  double max_filtration = topo::kFingerprintFiltration;
  bool heavy_only = true;
};

inline nlohmann::json cmd_fingerprint(const FingerprintOptions& o, const Logger& log) {
  if (!(o.max_filtration > 0.0)) throw ConfigError("--max-filtration must be positive");
  struct Cloud {
    std::string source, name;
    Coords points;
  };
  std::vector<Cloud> clouds;
  for (const auto& in : o.inputs) {
    const auto text = read_file(in);
    if (in.extension() == ".pdb") {
      Cloud c{in.string(), in.stem().string(), {}};
      for (const auto& a : molio::parse_pdb_atoms(text))
        if (!o.heavy_only || !molio::is_hydrogen(a.element)) c.points.push_back(a.pos);
      clouds.push_back(std::move(c));
    } else {
      auto parsed = molio::parse_sdf(text);
      for (const auto& e : parsed.errors)
        log.warn("skip_record", {{"file", in.string()}, {"record", e.record_index}, {"reason", e.message}});
      for (const auto& r : parsed.records)
        clouds.push_back({in.string(), r.mol.name(), (o.heavy_only ? r.mol.without_hydrogens() : r.mol).coords()});
    }
  }
  if (clouds.empty()) throw EmptyResult("no point clouds to fingerprint");
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t k = 0; k < clouds.size(); ++k) {
    const auto& c = clouds[k];
    nlohmann::json e{{"source", c.source}, {"name", c.name}, {"points", c.points.size()}};
    if (c.points.size() < 2) {
      e["fingerprint"] = nullptr;
      log.warn("fingerprint_skipped", {{"name", c.name}, {"reason", "fewer than two points"}});
    } else {
      const auto pd = topo::rips_persistence(c.points, o.max_filtration, 1);
      e["fingerprint"] = topo::fingerprint_from_diagram(pd);
      if (!o.diagram_dir.empty()) write_atomic(o.diagram_dir / (std::to_string(k) + "_" + c.name + ".csv"), pd.to_csv());
    }
    entries.push_back(std::move(e));
  }
  nlohmann::json out{{"max_filtration", o.max_filtration},
                     {"layout",
                      {"h0_normalized_entropy", "h0_total_persistence", "h0_max_persistence", "h0_bars",
                       "h1_normalized_entropy", "h1_total_persistence", "h1_max_persistence", "h1_bars"}},
                     {"entries", entries}};
  if (!o.out.empty()) write_atomic(o.out, out.dump(2) + "\n");
  return out;
}

// ---------------------------------------------------------------------------
// print-config

// Defaults, or the validated file merged over the defaults.
inline nlohmann::json cmd_print_config(const fs::path& config) { return diffusion::to_json(load_train_config(config)); }

}  // namespace amdiff::cli
