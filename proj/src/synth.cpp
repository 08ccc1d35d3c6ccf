#include "valence/synth.hpp"

#include <cmath>
#include <algorithm>
#include <map>

#include "valence/util/quota.hpp"
#include "valence/util/random.hpp"

namespace valence {

namespace {

FrameBank make_builtin() {
  FrameBank b;
  b.frames[index_of(ValenceLabel::kStigmatizing)] = {
      "Patient was {w} with nursing staff and yelled during the assessment.",
      "Pt is {w} and rude to the team, declining vitals overnight.",
      "Noted to be {w} again, shouting at the resident about discharge.",
      "She remains {w}; left against medical advice after arguing with staff.",
      "Patient {w} per RN, hostile and dismissive toward the care team.",
      "Again described as {w} and threatening when asked about medications.",
      "Pt was {w} during rounds, cursing at staff and pulling out her IV.",
      "Documented as {w} by security after a verbal outburst on the unit.",
  };
  b.frames[index_of(ValenceLabel::kPrivileging)] = {
      "Patient is {w} and smiling, thanked the team for her care.",
      "Pt remains {w} and grateful, asking thoughtful questions about recovery.",
      "She was {w} throughout the visit and praised the nursing staff.",
      "Mother is {w}, bonding well with baby and eager to learn.",
      "Patient {w} today, excellent rapport with providers.",
      "Very {w} woman, warm and kind with everyone on the unit.",
      "Pt was {w} and polite, expressed appreciation for the explanation.",
      "Remarkably {w} at bedside, cheerful and upbeat this morning.",
  };
  b.frames[index_of(ValenceLabel::kNeutral)] = {
      "Handout: discuss how to respond if a partner becomes {w} at home.",
      "Template text: screen whether the patient is {w} with prior plan of care.",
      "Her husband reports the toddler was {w} this morning at daycare.",
      "Education provided on {w} as a common reaction after delivery.",
      "Form field: {w} (yes/no) to be completed by the admitting nurse.",
      "Family member states the neighbor was {w} about parking.",
      "Reviewed checklist item on {w} from the standard intake questionnaire.",
      "Discussed with resident that the term {w} should be defined in the protocol.",
  };
  b.filler = {
      "Vital signs reviewed and stable.",
      "Fundal height consistent with dates.",
      "Labs pending at time of note.",
      "No acute distress noted on exam.",
      "Plan to continue current medications.",
      "Fetal heart tracing category I.",
      "Blood pressure within normal range.",
      "Will follow up with attending in the morning.",
      "Pain controlled with oral analgesics.",
      "Ambulating without assistance.",
      "Tolerating regular diet.",
      "Contact: ___ at extension ___.",
      "Seen by ___ on call.",
      "Lochia within normal limits.",
      "Breastfeeding support offered.",
      "Incision clean, dry and intact.",
      "Discharge planning in progress.",
      "Hemoglobin stable from prior draw.",
      "Urine output adequate.",
      "Medication reconciliation done.",
  };
  return b;
}

std::string fill(std::string_view frame, std::string_view word) {
  const auto pos = frame.find("{w}");
  std::string out(frame.substr(0, pos));
  out += word;
  out += frame.substr(pos + 3);
  return out;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& items) {
  return items[static_cast<std::size_t>(rng.below(items.size()))];
}

}  // namespace

void FrameBank::validate() const {
  for (ValenceLabel label : kAllLabels) {
    const auto& list = frames[index_of(label)];
    if (list.empty()) throw ValidationError("no frames for label " + std::string(to_string(label)));
    for (const std::string& f : list) {
      const auto first = f.find("{w}");
      if (first == std::string::npos || f.find("{w}", first + 1) != std::string::npos) {
        throw ValidationError("frame must contain exactly one {w} slot: '" + f + "'");
      }
    }
  }
  if (filler.empty()) throw ValidationError("frame bank needs filler sentences");
}

const FrameBank& builtin_frames() {
  static const FrameBank bank = make_builtin();
  return bank;
}

FrameBank frames_from_json(const Json& json) {
  FrameBank b;
  const Json frames = require_field<Json>(json, "frames");
  for (ValenceLabel label : kAllLabels) {
    b.frames[index_of(label)] =
        require_field<std::vector<std::string>>(frames, std::string(to_string(label)).c_str());
  }
  b.filler = require_field<std::vector<std::string>>(json, "filler");
  b.validate();
  return b;
}

void SynthSpec::validate() const {
  double sum = 0.0;
  for (double m : mix) {
    if (!(m >= 0.0)) throw ValidationError("label mix entries must be non-negative");
    sum += m;
  }
  if (!(sum > 0.0)) throw ValidationError("label mix must have a positive entry");
  if (specialties.empty()) throw ValidationError("at least one specialty is required");
  if (min_filler > max_filler) throw ValidationError("min_filler exceeds max_filler");
}

std::array<std::size_t, kNumLabels> synth_label_counts(std::size_t n,
                                                       const std::array<double, kNumLabels>& mix) {
  std::array<double, kNumLabels> targets{};
  std::array<std::size_t, kNumLabels> caps{};
  const double sum = mix[0] + mix[1] + mix[2];
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    targets[k] = static_cast<double>(n) * mix[k] / sum;
    caps[k] = n;
  }
  const auto alloc = allocate_quota(targets, caps, n);
  std::array<std::size_t, kNumLabels> out{};
  std::copy(alloc.begin(), alloc.end(), out.begin());
  return out;
}

SynthCorpus synth_corpus(const SynthSpec& spec, std::span<const LexiconTerm> terms,
                         std::uint64_t seed, const FrameBank& frames) {
  spec.validate();
  frames.validate();
  SynthCorpus corpus;
  if (spec.n_notes == 0) return corpus;
  if (terms.empty()) throw DomainError("synthetic corpus needs at least one lexicon term");

  const auto counts = synth_label_counts(spec.n_notes, spec.mix);
  std::vector<ValenceLabel> labels;
  for (ValenceLabel label : kAllLabels) labels.insert(labels.end(), counts[index_of(label)], label);
  Rng rng(seed);
  rng.shuffle(labels);

  const std::size_t width = std::max<std::size_t>(5, std::to_string(spec.n_notes).size());
  for (std::size_t i = 0; i < spec.n_notes; ++i) {
    const LexiconTerm& term = terms[static_cast<std::size_t>(rng.below(terms.size()))];
    const std::string& variant = pick(rng, term.variants);
    const ValenceLabel label = labels[i];
    const std::string& frame = pick(rng, frames.frames[index_of(label)]);

    const std::size_t span = spec.max_filler - spec.min_filler + 1;
    const std::size_t before = spec.min_filler + static_cast<std::size_t>(rng.below(span));
    const std::size_t after = spec.min_filler + static_cast<std::size_t>(rng.below(span));
    std::string text;
    for (std::size_t s = 0; s < before; ++s) text += pick(rng, frames.filler) + " ";
    text += fill(frame, variant);
    for (std::size_t s = 0; s < after; ++s) text += " " + pick(rng, frames.filler);

    std::string id = std::to_string(i + 1);
    id.insert(0, width - std::min(id.size(), width), '0');
    SourceNote note{"synth-" + id, spec.corpus_tag, pick(rng, spec.specialties), std::move(text)};
    corpus.gold.push_back({note.note_id, term.term_id, label});
    corpus.notes.push_back(std::move(note));
  }
  return corpus;
}

Json to_json(const SynthGold& g) {
  return {{"note_id", g.note_id}, {"term_id", g.term_id}, {"label", to_string(g.label)}};
}

SynthGold synth_gold_from_json(const Json& json) {
  return {require_field<std::string>(json, "note_id"), require_field<std::string>(json, "term_id"),
          require_label(require_field<std::string>(json, "label"))};
}

std::vector<LabeledChunk> label_chunks(std::span<const Chunk> chunks, std::span<const SynthGold> gold) {
  std::map<std::string, const SynthGold*> by_note;
  for (const SynthGold& g : gold) by_note[g.note_id] = &g;
  std::vector<LabeledChunk> out;
  out.reserve(chunks.size());
  for (const Chunk& c : chunks) {
    const auto it = by_note.find(c.note_id);
    if (it == by_note.end()) throw ValidationError("no gold label for note '" + c.note_id + "'");
    if (it->second->term_id != c.term_id) {
      throw ValidationError("chunk '" + c.chunk_id + "' anchors term '" + c.term_id +
                            "' but the note's gold is for '" + it->second->term_id + "'");
    }
    out.push_back({c, it->second->label, "single"});
  }
  return out;
}

}  // namespace valence
