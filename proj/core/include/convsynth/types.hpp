#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace convsynth {

// Opaque speaker label. "S1"/"S2" is the convention for generated scripts,
// real corpora may use anything non-empty.
struct SpeakerId {
  std::string label;

  SpeakerId() = default;
  explicit SpeakerId(std::string l) : label(std::move(l)) {}

  friend bool operator==(const SpeakerId&, const SpeakerId&) = default;
  friend auto operator<=>(const SpeakerId&, const SpeakerId&) = default;
};

struct Turn {
  SpeakerId speaker;
  std::string text;
  std::size_t index = 0;

  friend bool operator==(const Turn&, const Turn&) = default;
};

// Ordered speaker-tagged turns. Indices are assigned on construction so they
// are always consecutive from zero.
class ConversationScript {
 public:
  ConversationScript() = default;
  explicit ConversationScript(std::vector<std::pair<SpeakerId, std::string>> turns);

  const std::vector<Turn>& turns() const { return turns_; }
  std::size_t size() const { return turns_.size(); }
  bool empty() const { return turns_.empty(); }

  // Number of distinct speakers, in first-appearance order.
  std::size_t speaker_count() const { return speakers_.size(); }
  const std::vector<SpeakerId>& speakers() const { return speakers_; }

  // Total whitespace-separated words over all turns.
  std::size_t word_count() const;

  friend bool operator==(const ConversationScript& a, const ConversationScript& b) {
    return a.turns_ == b.turns_;
  }

 private:
  std::vector<Turn> turns_;
  std::vector<SpeakerId> speakers_;
};

struct UtteranceSegment {
  SpeakerId speaker;
  double start = 0.0;
  double end = 0.0;
  std::string text;
  // Index of the utterance group within its record, set by attach_groups.
  std::optional<std::size_t> group;

  double duration() const { return end - start; }
  friend bool operator==(const UtteranceSegment&, const UtteranceSegment&) = default;
};

// Throws std::invalid_argument unless start >= 0, end > start and both finite.
void check_segment(const UtteranceSegment& seg);

// Orders by (start, end, speaker, text); the canonical order used by grouping
// and serialization.
bool segment_less(const UtteranceSegment& a, const UtteranceSegment& b);

struct UtteranceGroup {
  std::vector<UtteranceSegment> segments;
  double span_start = 0.0;
  double span_end = 0.0;

  double span() const { return span_end - span_start; }
};

// Builds a group and computes its span from the segments (sorted canonically).
UtteranceGroup make_group(std::vector<UtteranceSegment> segments);

struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 16000;

  std::size_t size() const { return samples.size(); }
  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// Throws std::invalid_argument on a non-positive rate or a non-finite sample.
void check_clip(const AudioClip& clip);

// Largest absolute sample value, 0 for an empty clip.
double peak(const AudioClip& clip);

// Scales the clip down so that |s| <= 1 when the peak exceeds 1. Returns the
// applied scale (1.0 when untouched).
double peak_guard(AudioClip& clip);

enum class Provenance { overlap_sim, tts_stitch, conv_tts, real };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

struct ManifestRecord {
  std::string id;
  std::string audio_path;  // relative to the manifest directory
  int sample_rate = 16000;
  double duration = 0.0;
  std::vector<UtteranceSegment> segments;
  std::string sot_text;
  Provenance provenance = Provenance::real;
  std::uint64_t seed = 0;
  // Group indices (see UtteranceSegment::group) dropped by the span cap.
  std::vector<std::size_t> discarded_groups;

  // Set by read_manifest when audio_path does not resolve; not serialized.
  bool audio_missing = false;

  friend bool operator==(const ManifestRecord& a, const ManifestRecord& b) {
    return a.id == b.id && a.audio_path == b.audio_path && a.sample_rate == b.sample_rate &&
           a.duration == b.duration && a.segments == b.segments && a.sot_text == b.sot_text &&
           a.provenance == b.provenance && a.seed == b.seed &&
           a.discarded_groups == b.discarded_groups;
  }
};

using DatasetManifest = std::vector<ManifestRecord>;

// Stable identifier of group `index` inside record `record_id`.
std::string group_key(const std::string& record_id, std::size_t index);

enum class AdjacentSpeakerPolicy { allow, flag };

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// Reports structural problems; never throws. With AdjacentSpeakerPolicy::flag,
// consecutive turns by the same speaker are reported as well.
ValidationReport validate_script(const ConversationScript& script, std::size_t max_speakers,
                                 AdjacentSpeakerPolicy adjacent = AdjacentSpeakerPolicy::allow);

}  // namespace convsynth
