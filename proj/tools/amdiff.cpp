#include <iostream>
#include <sstream>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <CLI11.hpp>

#include "amdiff/cli/commands.hpp"

namespace {

using namespace amdiff;
using cli::ExitCode;

std::vector<std::size_t> parse_steps(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ConfigError("--snapshots expects comma-separated non-negative integers, got '" + item + "'");
    }
  }
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"amdiff: atom and motif diffusion for pocket-conditioned ligand generation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cli::kCodeVersion);

  cli::IngestOptions ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Pair ligands with protein pockets into a dataset bundle");
  c_ingest->add_option("ligand_dir", ingest.ligand_dir, "Directory of ligand SDF files (X.sdf)")->required();
  c_ingest->add_option("protein_dir", ingest.protein_dir, "Directory of protein PDB files (X.pdb)")->required();
  c_ingest->add_option("-o,--out", ingest.out_dir, "Bundle directory")->required();
  c_ingest->add_option("--radius", ingest.radius, "Pocket radius in Angstrom")->capture_default_str();
  c_ingest->add_option("--max-rmsd", ingest.max_rmsd, "Pose RMSD cutoff against the first pose")->capture_default_str();

  cli::VocabOptions vocab;
  auto* c_vocab = app.add_subcommand("vocab", "Build a motif vocabulary");
  c_vocab->add_option("inputs", vocab.inputs, "Bundle directories, SDF files or directories")->required();
  c_vocab->add_option("-o,--out", vocab.out, "Vocabulary JSON")->required();
  c_vocab->add_option("--min-freq", vocab.min_freq, "Minimum motif frequency")->capture_default_str();

  cli::TrainOptions train;
  std::size_t train_steps = 0;
  std::uint64_t train_seed = 0;
  auto* c_train = app.add_subcommand("train", "Train the denoiser on a bundle");
  c_train->add_option("bundle", train.bundle, "Bundle directory")->required();
  c_train->add_option("-c,--config", train.config, "Training config JSON (see print-config)");
  c_train->add_option("-o,--out", train.out_dir, "Run directory")->required();
  c_train->add_option("--vocab", train.vocab, "Vocabulary JSON; built from the bundle when omitted");
  auto* o_steps = c_train->add_option("--steps", train_steps, "Override the configured step count");
  auto* o_seed = c_train->add_option("--seed", train_seed, "Override the configured seed");

  cli::SampleCliOptions sample;
  std::string snapshots;
  double scale = 0.0, gamma = 0.0;
  auto* c_sample = app.add_subcommand("sample", "Generate ligands for a pocket");
  c_sample->add_option("checkpoint", sample.checkpoint, "Checkpoint file")->required();
  c_sample->add_option("pocket", sample.pocket, "Pocket PDB (extracted), or a full protein with --ligand")->required();
  c_sample->add_option("-o,--out", sample.out_dir, "Output directory")->required();
  c_sample->add_option("--ligand", sample.ligand, "Reference ligand SDF whose centroid locates the pocket");
  c_sample->add_option("--radius", sample.radius, "Pocket radius in Angstrom")->capture_default_str();
  c_sample->add_option("-n,--n", sample.n, "Number of molecules")->capture_default_str();
  auto* o_scale = c_sample->add_option("--scale", scale, "Guidance scale s");
  auto* o_gamma = c_sample->add_option("--gamma", gamma, "Consistency projection weight in [0, 1]");
  c_sample->add_flag("--conditional-only", sample.conditional_only, "Skip the unconditional pass");
  c_sample->add_option("--snapshots", snapshots, "Comma-separated steps t to record, e.g. 200,500,800");
  c_sample->add_option("--seed", sample.seed, "Master seed")->capture_default_str();
  c_sample->add_option("--atoms", sample.atoms, "Atom count (with --motifs); drawn from training sizes otherwise");
  c_sample->add_option("--motifs", sample.motifs, "Motif count");

  cli::EvalOptions ev;
  std::string patterns;
  auto* c_eval = app.add_subcommand("eval", "Score generated molecules");
  c_eval->add_option("generated", ev.generated, "Generated SDF")->required();
  c_eval->add_option("-o,--out", ev.out_dir, "Report directory")->required();
  c_eval->add_option("-r,--reference", ev.references, "Reference SDF files or directories (repeatable)");
  c_eval->add_option("--rules", ev.rules, "Filter rules JSON");
  c_eval->add_option("--rmsd-reference", ev.rmsd_reference, "Index-matched conformations for RMSD");
  c_eval->add_option("--patterns", patterns, "Comma-separated angle and dihedral patterns");
  c_eval->add_option("--angle-bin", ev.angle.angle_bin, "Angle bin width in degrees")->capture_default_str();
  c_eval->add_option("--dihedral-bin", ev.angle.dihedral_bin, "Dihedral bin width in degrees")->capture_default_str();

  cli::FingerprintOptions fp;
  bool keep_h = false;
  auto* c_fp = app.add_subcommand("fingerprint", "Topological fingerprints of ligands (SDF) or pockets (PDB)");
  c_fp->add_option("inputs", fp.inputs, "SDF or PDB files")->required();
  c_fp->add_option("-o,--out", fp.out, "JSON output; stdout when omitted");
  c_fp->add_option("--diagrams", fp.diagram_dir, "Directory for persistence diagram CSVs");
  c_fp->add_option("--max-filtration", fp.max_filtration, "Rips filtration cap in Angstrom")->capture_default_str();
  c_fp->add_flag("--keep-hydrogens", keep_h, "Include hydrogen atoms");

  std::string config_path;
  auto* c_print = app.add_subcommand("print-config", "Print the training config with defaults filled in");
  c_print->add_option("-c,--config", config_path, "Config JSON to validate and complete");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ExitCode::Config);
  }

  auto* sub = app.get_subcommands().front();
  const cli::Logger log(&std::cerr, sub->get_name());
  try {
    if (sub == c_ingest) {
      cli::cmd_ingest(ingest, log);
    } else if (sub == c_vocab) {
      cli::cmd_vocab(vocab, log);
    } else if (sub == c_train) {
      if (o_steps->count()) train.steps = train_steps;
      if (o_seed->count()) train.seed = train_seed;
      cli::cmd_train(train, log);
    } else if (sub == c_sample) {
      if (o_scale->count()) sample.scale = scale;
      if (o_gamma->count()) sample.gamma = gamma;
      sample.snapshots = parse_steps(snapshots);
      cli::cmd_sample(sample, log);
    } else if (sub == c_eval) {
      if (!patterns.empty()) {
        ev.patterns.clear();
        std::stringstream ss(patterns);
        std::string p;
        while (std::getline(ss, p, ','))
          if (!p.empty()) ev.patterns.push_back(p);
      }
      return static_cast<int>(cli::cmd_eval(ev, log).code);
    } else if (sub == c_fp) {
      fp.heavy_only = !keep_h;
      const auto j = cli::cmd_fingerprint(fp, log);
      if (fp.out.empty()) std::cout << j.dump(2) << '\n';
    } else if (sub == c_print) {
      std::cout << cli::cmd_print_config(config_path).dump(2) << '\n';
    }
  } catch (const std::exception& e) {
    const auto code = cli::exit_code_for(e);
    log.error("failed", {{"message", e.what()}, {"exit_code", static_cast<int>(code)}});
    return static_cast<int>(code);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Keep freed blocks in the heap; the network allocates many short-lived matrices.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  return run(argc, argv);
}
