#pragma once

#include <string>
#include <vector>

#include "amdiff/diffusion/trainer.hpp"
#include "amdiff/molio/pdb.hpp"
#include "amdiff/motif/vocabulary.hpp"
#include "test_util.hpp"

namespace amdiff::testing {

// The five fixture ligand-pocket pairs, heavy atoms only, pockets cut at 10 A
// around the ligand centroid.
struct PairSet {
  std::vector<std::string> names{"phenol", "benzamide", "picoline", "acetanilide", "indole"};
  std::vector<molio::MolecularGraph> mols;
  std::vector<molio::PocketCloud> pockets;
  motif::MotifVocabulary vocab;
  std::vector<diffusion::TrainExample> examples;

  explicit PairSet(std::size_t count = 5) {
    names.resize(count);
    for (const auto& n : names) {
      auto parsed = molio::parse_sdf(read_text(data_path("pairs/ligands/" + n + ".sdf")));
      mols.push_back(parsed.records.front().mol.without_hydrogens());
      pockets.push_back(
          molio::parse_pocket_pdb(read_text(data_path("pairs/proteins/" + n + ".pdb")), centroid(mols.back().coords()), 10.0));
    }
    vocab = motif::build_vocabulary(mols, 1);
    for (std::size_t i = 0; i < mols.size(); ++i)
      examples.push_back(diffusion::make_example(mols[i], motif::assign_ids(motif::decompose(mols[i]), vocab), pockets[i],
                                                 vocab.size()));
  }
};

}  // namespace amdiff::testing
