#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "amdiff/core/error.hpp"
#include "amdiff/core/hash.hpp"
#include "amdiff/molio/sdf.hpp"
#include "amdiff/motif/decompose.hpp"

namespace amdiff::motif {

struct VocabularyEntry {
  std::uint64_t digest = 0;
  molio::MolecularGraph exemplar;
  std::size_t frequency = 0;
};

// Corpus-derived motif vocabulary. Entries are sorted by descending frequency,
// then ascending digest; an entry's position is its motif ID.
class MotifVocabulary {
public:
  static constexpr int kFormatVersion = 1;

  MotifVocabulary() = default;

  MotifVocabulary(std::vector<VocabularyEntry> entries, std::size_t min_frequency)
      : entries_(std::move(entries)), min_frequency_(min_frequency) {
    std::sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) {
      if (a.frequency != b.frequency) return a.frequency > b.frequency;
      return a.digest < b.digest;
    });
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (!index_.emplace(entries_[i].digest, i).second) throw Error("duplicate motif digest in vocabulary");
    }
  }

  std::size_t size() const { return entries_.size(); }
  std::size_t min_frequency() const { return min_frequency_; }
  const std::vector<VocabularyEntry>& entries() const { return entries_; }

  std::optional<std::size_t> find(std::uint64_t digest) const {
    auto it = index_.find(digest);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = "amdiff-motif-vocabulary";
    j["version"] = kFormatVersion;
    j["min_frequency"] = min_frequency_;
    j["entries"] = nlohmann::json::array();
    for (const auto& e : entries_) {
      j["entries"].push_back({{"digest", to_hex(e.digest)},
                              {"frequency", e.frequency},
                              {"exemplar", molio::write_sdf_record(e.exemplar)}});
    }
    return j;
  }

  static MotifVocabulary from_json(const nlohmann::json& j) {
    try {
      if (j.at("version").get<int>() != kFormatVersion)
        throw ParseError("unsupported vocabulary version " + j.at("version").dump());
      std::vector<VocabularyEntry> entries;
      for (const auto& e : j.at("entries")) {
        VocabularyEntry v;
        v.digest = from_hex(e.at("digest").get<std::string>());
        v.frequency = e.at("frequency").get<std::size_t>();
        auto parsed = molio::parse_sdf(e.at("exemplar").get<std::string>());
        if (parsed.records.size() != 1) throw ParseError("vocabulary exemplar is not a single SDF record");
        v.exemplar = parsed.records.front().mol;
        entries.push_back(std::move(v));
      }
      return MotifVocabulary(std::move(entries), j.at("min_frequency").get<std::size_t>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed vocabulary JSON: ") + e.what());
    }
  }

private:
  std::vector<VocabularyEntry> entries_;
  std::size_t min_frequency_ = 1;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

// Decomposes every molecule and keeps fragments seen at least `min_frequency`
// times. Each fragment's exemplar is the occurrence with the lexicographically
// smallest SDF text, so the result does not depend on corpus order.
inline MotifVocabulary build_vocabulary(const std::vector<molio::MolecularGraph>& mols,
                                        std::size_t min_frequency = 1) {
  if (mols.empty()) throw DomainError("cannot build a motif vocabulary from an empty corpus");
  struct Acc {
    std::size_t count = 0;
    std::string text;
    molio::MolecularGraph exemplar;
  };
  std::map<std::uint64_t, Acc> acc;
  for (const auto& mol : mols) {
    const auto view = decompose(mol);
    for (const auto& m : view.motifs) {
      auto frag = mol.subgraph(m.members).with_name(to_hex(m.digest));
      auto text = molio::write_sdf_record(frag);
      auto& a = acc[m.digest];
      if (a.count == 0 || text < a.text) {
        a.text = std::move(text);
        a.exemplar = std::move(frag);
      }
      ++a.count;
    }
  }
  std::vector<VocabularyEntry> entries;
  for (auto& [digest, a] : acc)
    if (a.count >= min_frequency) entries.push_back({digest, std::move(a.exemplar), a.count});
  return MotifVocabulary(std::move(entries), min_frequency);
}

// Looks every motif up in the vocabulary; misses are marked out-of-vocabulary.
inline MotifView assign_ids(const MotifView& view, const MotifVocabulary& vocab) {
  MotifView out = view;
  for (auto& m : out.motifs) m.id = vocab.find(m.digest);
  return out;
}

}  // namespace amdiff::motif
