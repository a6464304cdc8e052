#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "convsynth/dsp.hpp"
#include "convsynth/services.hpp"
#include "convsynth/sot.hpp"
#include "convsynth/types.hpp"

namespace convsynth {

class Rng;

struct SessionParams {
  double target_overlap_ratio = 0.2;
  double pause_mean = 0.5;
  double pause_max = 2.0;
  double max_duration = 30.0;
  double max_overlap = 2.0;  // cap on a single overlap offset, seconds
  std::optional<double> snr_db;
  std::optional<dsp::RoomSpec> rir;
  bool random_rir = false;  // draw a room per session when `rir` is unset
  bool bandlimit = false;
  bool highpass = false;
  std::uint64_t rng_seed = 0;
  int output_rate = 16000;
  int redraw_budget = 20;
};

// Throws std::invalid_argument on out-of-range parameters.
void check_session(const SessionParams& params);

struct CorpusUtterance {
  AudioClip audio;
  std::string transcript;
  SpeakerId speaker;
};

class CorpusPool {
 public:
  explicit CorpusPool(std::vector<CorpusUtterance> utterances);

  const std::vector<CorpusUtterance>& utterances() const { return utterances_; }
  const std::vector<SpeakerId>& speakers() const { return speakers_; }
  const std::vector<std::size_t>& indices_of(const SpeakerId& speaker) const;

 private:
  std::vector<CorpusUtterance> utterances_;
  std::vector<SpeakerId> speakers_;
  std::map<SpeakerId, std::vector<std::size_t>> index_;
};

// Tone-speech utterances (see mock_speech) for `speakers` speakers.
CorpusPool make_mock_corpus(std::size_t speakers, std::size_t per_speaker, std::uint64_t seed,
                            int sample_rate = 16000);

struct Session {
  AudioClip audio;
  std::vector<UtteranceSegment> segments;  // ordered by start
};

// Time covered by two or more segments divided by time covered by any.
double overlap_ratio(const std::vector<UtteranceSegment>& segments);

// RIR (cropped to the input length), white noise at snr_db, then the
// telephone band-limit; each step only when configured.
AudioClip contaminate(AudioClip clip, const SessionParams& params, Rng& rng);

Session simulate_overlap(const CorpusPool& pool, const SessionParams& params);

Session stitch_tts(const ConversationScript& script, const std::map<SpeakerId, std::string>& voices,
                   UtteranceTtsService& tts, const SessionParams& params);

Session conv_tts_passthrough(const ConversationScript& script, ConversationTtsService& service,
                             const SessionParams& params);

enum class SynthMode { overlap_sim, tts_stitch, conv_tts };

SynthMode synth_mode_from_string(const std::string& s);
std::string to_string(SynthMode m);

struct DatasetSpec {
  SynthMode mode = SynthMode::overlap_sim;
  std::size_t n_conversations = 10;
  // When set, replaces n_conversations: conversations are added until the
  // running average duration predicts the requested total.
  std::optional<double> target_hours;
  std::uint64_t master_seed = 0;
  SessionParams session;  // rng_seed is replaced per conversation

  const CorpusPool* pool = nullptr;               // overlap_sim
  std::vector<ConversationScript> scripts;        // tts modes, used cyclically
  UtteranceTtsService* tts = nullptr;             // tts_stitch
  ConversationTtsService* conv_tts = nullptr;     // conv_tts

  SotConfig sot;
  std::size_t jobs = 1;
  std::string config_snapshot;  // written to out_dir/config_snapshot when non-empty
};

struct BuildFailure {
  std::size_t index = 0;
  std::string id;
  std::string error;
};

struct BuildResult {
  DatasetManifest manifest;
  std::vector<BuildFailure> failures;
  std::size_t attempted = 0;
};

// out_dir/audio/conv_%06d.wav plus out_dir/manifest.jsonl. Conversation i
// uses derive_seed(master_seed, "conversation", i).
BuildResult build_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir);

// Normalized SOT text of a whole conversation.
std::string conversation_sot(const std::vector<UtteranceSegment>& segments, const SotConfig& cfg = {});

}  // namespace convsynth
