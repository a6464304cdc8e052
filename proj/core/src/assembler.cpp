#include "convsynth/assembler.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "convsynth/manifest.hpp"
#include "convsynth/parallel.hpp"
#include "convsynth/rng.hpp"
#include "convsynth/wav.hpp"

namespace convsynth {

void check_session(const SessionParams& p) {
  if (!(p.target_overlap_ratio >= 0.0 && p.target_overlap_ratio < 1.0))
    throw std::invalid_argument("target_overlap_ratio must be in [0, 1)");
  if (!(p.pause_mean >= 0.0)) throw std::invalid_argument("pause_mean must be >= 0");
  if (!(p.pause_max >= p.pause_mean)) throw std::invalid_argument("pause_max must be >= pause_mean");
  if (!(p.max_duration > 0.0)) throw std::invalid_argument("max_duration must be > 0");
  if (!(p.max_overlap >= 0.0)) throw std::invalid_argument("max_overlap must be >= 0");
  if (p.snr_db && !std::isfinite(*p.snr_db)) throw std::invalid_argument("snr_db must be finite");
  if (p.rir) dsp::check_room(*p.rir);
  if (p.output_rate < 8000) throw std::invalid_argument("output_rate must be >= 8000");
  if (p.redraw_budget < 1) throw std::invalid_argument("redraw_budget must be >= 1");
}

CorpusPool::CorpusPool(std::vector<CorpusUtterance> utterances) : utterances_(std::move(utterances)) {
  for (std::size_t i = 0; i < utterances_.size(); ++i) {
    const auto& u = utterances_[i];
    if (u.speaker.label.empty()) throw std::invalid_argument("corpus utterance without speaker");
    check_clip(u.audio);
    auto& idx = index_[u.speaker];
    if (idx.empty()) speakers_.push_back(u.speaker);
    idx.push_back(i);
  }
}

const std::vector<std::size_t>& CorpusPool::indices_of(const SpeakerId& speaker) const {
  const auto it = index_.find(speaker);
  if (it == index_.end()) throw std::out_of_range("speaker '" + speaker.label + "' not in pool");
  return it->second;
}

CorpusPool make_mock_corpus(std::size_t speakers, std::size_t per_speaker, std::uint64_t seed, int sample_rate) {
  static const std::vector<std::string> words = {
      "yes",   "okay",  "right", "so",     "we",    "should", "call",  "them",  "later", "about",
      "the",   "plan",  "for",   "monday", "really", "think", "that",  "works", "maybe", "not",
      "sure",  "what",  "time",  "again",  "well",  "good",   "idea",  "quite", "busy",  "week"};
  std::vector<CorpusUtterance> out;
  for (std::size_t s = 0; s < speakers; ++s) {
    char label[32];
    std::snprintf(label, sizeof label, "spk%03zu", s);
    Rng rng(derive_seed(seed, "mock-corpus", s));
    for (std::size_t u = 0; u < per_speaker; ++u) {
      const std::size_t n = 2 + rng.index(9);
      std::string text;
      for (std::size_t w = 0; w < n; ++w) text += (w ? " " : "") + words[rng.index(words.size())];
      out.push_back({mock_speech(text, label, sample_rate), text, SpeakerId(label)});
    }
  }
  return CorpusPool(std::move(out));
}

double overlap_ratio(const std::vector<UtteranceSegment>& segments) {
  std::vector<std::pair<double, int>> events;
  for (const auto& s : segments) {
    events.emplace_back(s.start, 1);
    events.emplace_back(s.end, -1);
  }
  // Ends before starts at equal times, so touching segments do not overlap.
  std::sort(events.begin(), events.end());
  double any = 0.0, multi = 0.0, last = 0.0;
  int active = 0;
  for (const auto& [t, delta] : events) {
    if (active >= 1) any += t - last;
    if (active >= 2) multi += t - last;
    active += delta;
    last = t;
  }
  return any > 0.0 ? multi / any : 0.0;
}

AudioClip contaminate(AudioClip clip, const SessionParams& params, Rng& rng) {
  std::optional<dsp::RoomSpec> room = params.rir;
  if (!room && params.random_rir) room = dsp::random_room(rng);
  if (room) {
    const AudioClip h = dsp::generate_rir(*room, clip.sample_rate);
    auto wet = dsp::convolve_raw(clip.samples, h.samples);
    wet.resize(clip.samples.size());
    clip.samples = std::move(wet);
    peak_guard(clip);
  }
  if (params.snr_db) {
    AudioClip noise;
    noise.sample_rate = clip.sample_rate;
    noise.samples.resize(clip.samples.size());
    for (auto& x : noise.samples) x = rng.normal();
    clip = dsp::mix_at_snr(clip, noise, *params.snr_db, dsp::NoiseFit::crop).mixture;
  }
  if (params.bandlimit) clip = dsp::telephone_bandlimit(clip, params.highpass);
  return clip;
}

namespace {

struct Placed {
  SpeakerId speaker;
  std::size_t start = 0;  // samples
  const AudioClip* clip = nullptr;
  std::string text;
};

std::size_t to_samples(double seconds, int rate) {
  return static_cast<std::size_t>(std::llround(std::max(0.0, seconds) * rate));
}

Session render(const std::vector<Placed>& placed, int rate) {
  Session s;
  s.audio.sample_rate = rate;
  std::size_t total = 0;
  for (const auto& p : placed) total = std::max(total, p.start + p.clip->size());
  s.audio.samples.assign(total, 0.0);
  for (const auto& p : placed) {
    for (std::size_t k = 0; k < p.clip->size(); ++k) s.audio.samples[p.start + k] += p.clip->samples[k];
    UtteranceSegment seg;
    seg.speaker = p.speaker;
    seg.start = static_cast<double>(p.start) / rate;
    seg.end = static_cast<double>(p.start + p.clip->size()) / rate;
    seg.text = p.text;
    s.segments.push_back(std::move(seg));
  }
  std::stable_sort(s.segments.begin(), s.segments.end(),
                   [](const auto& a, const auto& b) { return a.start < b.start; });
  peak_guard(s.audio);
  return s;
}

std::vector<UtteranceSegment> placed_segments(const std::vector<Placed>& placed, int rate) {
  std::vector<UtteranceSegment> out;
  for (const auto& p : placed)
    out.push_back({p.speaker, static_cast<double>(p.start) / rate,
                   static_cast<double>(p.start + p.clip->size()) / rate, {}, {}});
  return out;
}

double draw_pause(Rng& rng, const SessionParams& params) {
  if (params.pause_mean <= 0.0) return 0.0;
  return std::min(rng.exponential(params.pause_mean), params.pause_max);
}

double draw_overlap(Rng& rng, const SessionParams& params, double prev_duration) {
  return rng.uniform(0.0, std::min(0.5 * prev_duration, params.max_overlap));
}

}  // namespace

Session simulate_overlap(const CorpusPool& pool, const SessionParams& params) {
  check_session(params);
  const auto& speakers = pool.speakers();
  if (speakers.size() < 2) throw std::invalid_argument("overlap simulation needs at least 2 speakers");
  const int rate = params.output_rate;
  Rng rng(derive_seed(params.rng_seed, "overlap"));

  const std::size_t a = rng.index(speakers.size());
  std::size_t b = rng.index(speakers.size() - 1);
  if (b >= a) ++b;
  const std::array<SpeakerId, 2> pair{speakers[a], speakers[b]};
  std::array<std::vector<std::size_t>, 2> queue;
  for (int k = 0; k < 2; ++k) {
    queue[k] = pool.indices_of(pair[k]);
    for (std::size_t i = queue[k].size(); i > 1; --i) std::swap(queue[k][i - 1], queue[k][rng.index(i)]);
  }

  std::vector<AudioClip> clips;
  clips.reserve(queue[0].size() + queue[1].size());
  std::vector<Placed> placed;
  std::array<std::size_t, 2> last_end{0, 0};
  const std::size_t max_len = static_cast<std::size_t>(std::floor(params.max_duration * rate));

  for (std::size_t turn = 0;; ++turn) {
    const std::size_t who = turn % 2;
    if (queue[who].empty()) break;
    const auto& utt = pool.utterances()[queue[who].back()];
    queue[who].pop_back();
    clips.push_back(dsp::resample(utt.audio, rate));
    const AudioClip& clip = clips.back();
    if (clip.samples.empty()) continue;

    std::size_t start = 0;
    if (!placed.empty()) {
      const auto& prev = placed.back();
      const double prev_end = static_cast<double>(prev.start + prev.clip->size()) / rate;
      const double prev_dur = prev.clip->duration();
      const double realized = overlap_ratio(placed_segments(placed, rate));
      const double at = realized < params.target_overlap_ratio
                            ? prev_end - draw_overlap(rng, params, prev_dur)
                            : prev_end + draw_pause(rng, params);
      start = std::max(to_samples(at, rate), last_end[who]);
    }
    if (start + clip.size() > max_len) break;
    placed.push_back({pair[who], start, &clip, utt.transcript});
    last_end[who] = start + clip.size();
  }
  if (placed.empty()) throw std::runtime_error("corpus pool exhausted before any placement");

  Session s = render(placed, rate);
  Rng noise_rng(derive_seed(params.rng_seed, "contaminate"));
  s.audio = contaminate(std::move(s.audio), params, noise_rng);
  return s;
}

Session stitch_tts(const ConversationScript& script, const std::map<SpeakerId, std::string>& voices,
                   UtteranceTtsService& tts, const SessionParams& params) {
  check_session(params);
  if (script.empty()) throw std::invalid_argument("empty script");
  for (const auto& spk : script.speakers())
    if (!voices.contains(spk)) throw std::invalid_argument("no voice for speaker '" + spk.label + "'");
  const int rate = params.output_rate;

  std::vector<AudioClip> clips;
  for (const auto& turn : script.turns()) {
    TtsUtteranceRequest req;
    req.text = turn.text;
    req.speaker_ref = voices.at(turn.speaker);
    req.target_sample_rate = rate;
    AudioClip raw = tts.synthesize_utterance(req);
    if (raw.sample_rate != rate) raw = dsp::resample(raw, rate);
    clips.push_back(dsp::trim_silence(raw).clip);
  }

  Rng rng(derive_seed(params.rng_seed, "stitch"));
  const std::size_t max_len = static_cast<std::size_t>(std::floor(params.max_duration * rate));
  for (int attempt = 0; attempt < params.redraw_budget; ++attempt) {
    std::vector<Placed> placed;
    std::map<SpeakerId, std::size_t> last_end;
    std::size_t total = 0;
    for (std::size_t k = 0; k < clips.size(); ++k) {
      const auto& turn = script.turns()[k];
      std::size_t start = 0;
      if (k > 0) {
        const auto& prev = placed.back();
        const double prev_end = static_cast<double>(prev.start + prev.clip->size()) / rate;
        const double at = rng.bernoulli(params.target_overlap_ratio)
                              ? prev_end - draw_overlap(rng, params, prev.clip->duration())
                              : prev_end + draw_pause(rng, params);
        start = std::max({to_samples(at, rate), prev.start + 1, last_end[turn.speaker]});
      }
      placed.push_back({turn.speaker, start, &clips[k], turn.text});
      last_end[turn.speaker] = start + clips[k].size();
      total = std::max(total, start + clips[k].size());
    }
    if (total > max_len) continue;
    Session s = render(placed, rate);
    Rng noise_rng(derive_seed(params.rng_seed, "contaminate"));
    s.audio = contaminate(std::move(s.audio), params, noise_rng);
    return s;
  }
  throw std::runtime_error("stitched conversation exceeds max_duration after " +
                           std::to_string(params.redraw_budget) + " draws");
}

Session conv_tts_passthrough(const ConversationScript& script, ConversationTtsService& service,
                             const SessionParams& params) {
  check_session(params);
  const auto report = validate_script(script, 2);
  if (!report.ok()) throw std::invalid_argument("invalid script: " + report.violations.front());
  ConvTtsRequest req;
  req.script = script;
  req.max_duration = params.max_duration;
  ConvTtsResult r = service.synthesize_conversation(req);

  Session s;
  s.audio = dsp::resample(r.audio, params.output_rate);
  const double duration = s.audio.duration();
  for (auto& seg : r.segments) {
    seg.end = std::min(seg.end, duration);
    if (seg.end > seg.start) s.segments.push_back(std::move(seg));
  }
  std::stable_sort(s.segments.begin(), s.segments.end(),
                   [](const auto& a, const auto& b) { return a.start < b.start; });
  Rng noise_rng(derive_seed(params.rng_seed, "contaminate"));
  s.audio = contaminate(std::move(s.audio), params, noise_rng);
  return s;
}

SynthMode synth_mode_from_string(const std::string& s) {
  if (s == "overlap_sim") return SynthMode::overlap_sim;
  if (s == "tts_stitch") return SynthMode::tts_stitch;
  if (s == "conv_tts") return SynthMode::conv_tts;
  throw std::invalid_argument("unknown mode '" + s + "'");
}

std::string to_string(SynthMode m) {
  switch (m) {
    case SynthMode::overlap_sim: return "overlap_sim";
    case SynthMode::tts_stitch: return "tts_stitch";
    case SynthMode::conv_tts: return "conv_tts";
  }
  return "unknown";
}

std::string conversation_sot(const std::vector<UtteranceSegment>& segments, const SotConfig& cfg) {
  std::vector<UtteranceSegment> norm = segments;
  for (auto& s : norm) s.text = normalize_text(s.text);
  if (norm.empty()) return {};
  return serialize_group(make_group(std::move(norm)), cfg);
}

namespace {

std::string conversation_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "conv_%06zu", i);
  return buf;
}

Provenance provenance_of(SynthMode m) {
  switch (m) {
    case SynthMode::overlap_sim: return Provenance::overlap_sim;
    case SynthMode::tts_stitch: return Provenance::tts_stitch;
    case SynthMode::conv_tts: return Provenance::conv_tts;
  }
  return Provenance::real;
}

void check_spec(const DatasetSpec& spec) {
  check_session(spec.session);
  check_sot_config(spec.sot);
  if (spec.target_hours && !(*spec.target_hours > 0.0)) throw std::invalid_argument("target_hours must be > 0");
  switch (spec.mode) {
    case SynthMode::overlap_sim:
      if (!spec.pool) throw std::invalid_argument("overlap_sim needs a corpus pool");
      break;
    case SynthMode::tts_stitch:
      if (!spec.tts) throw std::invalid_argument("tts_stitch needs a TTS service");
      if (spec.scripts.empty()) throw std::invalid_argument("tts_stitch needs scripts");
      break;
    case SynthMode::conv_tts:
      if (!spec.conv_tts) throw std::invalid_argument("conv_tts needs a conversational TTS service");
      if (spec.scripts.empty()) throw std::invalid_argument("conv_tts needs scripts");
      break;
  }
}

ManifestRecord make_conversation(const DatasetSpec& spec, std::size_t i, const std::filesystem::path& out_dir) {
  const std::uint64_t seed = derive_seed(spec.master_seed, "conversation", i);
  SessionParams params = spec.session;
  params.rng_seed = seed;

  Session s;
  switch (spec.mode) {
    case SynthMode::overlap_sim:
      s = simulate_overlap(*spec.pool, params);
      break;
    case SynthMode::tts_stitch: {
      const auto& script = spec.scripts[i % spec.scripts.size()];
      auto available = spec.tts->voices();
      if (available.size() < script.speaker_count())
        throw std::runtime_error("not enough voices for " + std::to_string(script.speaker_count()) + " speakers");
      Rng rng(derive_seed(seed, "voices"));
      std::map<SpeakerId, std::string> voices;
      for (std::size_t k = 0; k < script.speaker_count(); ++k) {
        std::swap(available[k], available[k + rng.index(available.size() - k)]);
        voices[script.speakers()[k]] = available[k];
      }
      s = stitch_tts(script, voices, *spec.tts, params);
      break;
    }
    case SynthMode::conv_tts:
      s = conv_tts_passthrough(spec.scripts[i % spec.scripts.size()], *spec.conv_tts, params);
      break;
  }

  ManifestRecord rec;
  rec.id = conversation_id(i);
  rec.audio_path = "audio/" + rec.id + ".wav";
  rec.sample_rate = s.audio.sample_rate;
  rec.duration = round_us(s.audio.duration());
  rec.provenance = provenance_of(spec.mode);
  rec.seed = seed;
  const double last_ms = std::floor(rec.duration * 1000.0) / 1000.0;
  for (auto seg : s.segments) {
    seg.start = round_ms(seg.start);
    seg.end = std::min(round_ms(seg.end), last_ms);
    if (seg.end > seg.start) rec.segments.push_back(std::move(seg));
  }
  if (rec.segments.empty()) throw std::runtime_error("conversation has no segments");
  rec.sot_text = conversation_sot(rec.segments, spec.sot);
  write_wav(out_dir / rec.audio_path, s.audio);
  return rec;
}

}  // namespace

BuildResult build_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir) {
  check_spec(spec);
  std::filesystem::create_directories(out_dir / "audio");
  if (!spec.config_snapshot.empty()) atomic_write(out_dir / "config_snapshot", spec.config_snapshot);

  BuildResult result;
  std::vector<std::optional<ManifestRecord>> records;
  std::vector<std::optional<BuildFailure>> failures;
  auto run = [&](std::size_t from, std::size_t count) {
    records.resize(from + count);
    failures.resize(from + count);
    parallel_for(count, spec.jobs, [&](std::size_t k) {
      const std::size_t i = from + k;
      try {
        records[i] = make_conversation(spec, i, out_dir);
      } catch (const std::exception& e) {
        failures[i] = BuildFailure{i, conversation_id(i), e.what()};
      }
    });
  };

  if (!spec.target_hours) {
    run(0, spec.n_conversations);
  } else {
    const double target = *spec.target_hours * 3600.0;
    constexpr std::size_t first_batch = 8;
    constexpr std::size_t limit = 10'000'000;
    std::size_t next = 0;
    std::size_t batch = first_batch;
    while (batch > 0 && next < limit) {
      run(next, batch);
      next += batch;
      double total = 0.0;
      std::size_t ok = 0;
      for (const auto& r : records)
        if (r) {
          total += r->duration;
          ++ok;
        }
      if (ok == 0) break;
      const double average = total / static_cast<double>(ok);
      const auto needed = static_cast<std::size_t>(std::ceil(std::max(0.0, target - total) / average));
      batch = std::min(needed, limit - next);
    }
  }

  result.attempted = records.size();
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i]) result.manifest.push_back(std::move(*records[i]));
    if (failures[i]) result.failures.push_back(std::move(*failures[i]));
  }
  write_manifest(result.manifest, out_dir / "manifest.jsonl");
  return result;
}

}  // namespace convsynth
