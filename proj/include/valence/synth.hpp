#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "valence/dataset.hpp"
#include "valence/extraction.hpp"
#include "valence/lexicon.hpp"
#include "valence/util/jsonl.hpp"

namespace valence {

/// Sentence frames with a "{w}" slot for the keyword, per label, plus filler
/// sentences that contain no lexicon term.
struct FrameBank {
  std::array<std::vector<std::string>, kNumLabels> frames;
  std::vector<std::string> filler;

  void validate() const;
};

const FrameBank& builtin_frames();
FrameBank frames_from_json(const Json& json);

struct SynthSpec {
  std::size_t n_notes = 300;
  /// Relative label weights indexed by ValenceLabel; normalized before use.
  std::array<double, kNumLabels> mix = kReferenceLabelMix;
  std::string corpus_tag = "synthetic";
  std::vector<std::string> specialties = {"obgyn"};
  std::size_t min_filler = 2;  // filler sentences on each side of the frame
  std::size_t max_filler = 6;

  void validate() const;
};

struct SynthGold {
  std::string note_id;
  std::string term_id;
  ValenceLabel label = ValenceLabel::kNeutral;
};

struct SynthCorpus {
  std::vector<SourceNote> notes;
  std::vector<SynthGold> gold;  // one per note, same order
};

/// Label counts by largest remainder, so each is within one of n * mix / sum(mix).
std::array<std::size_t, kNumLabels> synth_label_counts(std::size_t n,
                                                       const std::array<double, kNumLabels>& mix);

/// Notes embedding exactly one lexicon term each in a frame of the note's
/// label. Deterministic per seed.
SynthCorpus synth_corpus(const SynthSpec& spec, std::span<const LexiconTerm> terms,
                         std::uint64_t seed, const FrameBank& frames = builtin_frames());

Json to_json(const SynthGold& gold);
SynthGold synth_gold_from_json(const Json& json);

/// Joins chunks with per-note gold (one term per note, so the note label is
/// the chunk label). Throws ValidationError for a chunk without gold.
std::vector<LabeledChunk> label_chunks(std::span<const Chunk> chunks, std::span<const SynthGold> gold);

}  // namespace valence
