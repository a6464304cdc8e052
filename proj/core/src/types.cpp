#include "convsynth/types.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <tuple>

namespace convsynth {

namespace {

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

ConversationScript::ConversationScript(std::vector<std::pair<SpeakerId, std::string>> turns) {
  turns_.reserve(turns.size());
  for (auto& [speaker, text] : turns) {
    if (std::find(speakers_.begin(), speakers_.end(), speaker) == speakers_.end())
      speakers_.push_back(speaker);
    turns_.push_back(Turn{std::move(speaker), std::move(text), turns_.size()});
  }
}

std::size_t ConversationScript::word_count() const {
  std::size_t n = 0;
  for (const auto& t : turns_) {
    std::istringstream in(t.text);
    std::string w;
    while (in >> w) ++n;
  }
  return n;
}

void check_segment(const UtteranceSegment& seg) {
  if (!std::isfinite(seg.start) || !std::isfinite(seg.end))
    throw std::invalid_argument("segment time is not finite");
  if (seg.start < 0.0) throw std::invalid_argument("segment starts before 0");
  if (!(seg.end > seg.start)) throw std::invalid_argument("segment end must exceed start");
}

bool segment_less(const UtteranceSegment& a, const UtteranceSegment& b) {
  return std::tie(a.start, a.end, a.speaker, a.text) < std::tie(b.start, b.end, b.speaker, b.text);
}

UtteranceGroup make_group(std::vector<UtteranceSegment> segments) {
  UtteranceGroup g;
  std::sort(segments.begin(), segments.end(), segment_less);
  if (!segments.empty()) {
    g.span_start = segments.front().start;
    g.span_end = segments.front().end;
    for (const auto& s : segments) {
      g.span_start = std::min(g.span_start, s.start);
      g.span_end = std::max(g.span_end, s.end);
    }
  }
  g.segments = std::move(segments);
  return g;
}

void check_clip(const AudioClip& clip) {
  if (clip.sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  for (double s : clip.samples)
    if (!std::isfinite(s)) throw std::invalid_argument("clip contains a non-finite sample");
}

double peak(const AudioClip& clip) {
  double p = 0.0;
  for (double s : clip.samples) p = std::max(p, std::abs(s));
  return p;
}

double peak_guard(AudioClip& clip) {
  const double p = peak(clip);
  if (p <= 1.0) return 1.0;
  const double scale = 1.0 / p;
  for (double& s : clip.samples) s *= scale;
  return scale;
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::overlap_sim: return "overlap_sim";
    case Provenance::tts_stitch: return "tts_stitch";
    case Provenance::conv_tts: return "conv_tts";
    case Provenance::real: return "real";
  }
  return "real";
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "overlap_sim") return Provenance::overlap_sim;
  if (s == "tts_stitch") return Provenance::tts_stitch;
  if (s == "conv_tts") return Provenance::conv_tts;
  if (s == "real") return Provenance::real;
  throw std::invalid_argument("unknown provenance '" + s + "'");
}

std::string group_key(const std::string& record_id, std::size_t index) {
  std::string idx = std::to_string(index);
  if (idx.size() < 3) idx.insert(0, 3 - idx.size(), '0');
  return record_id + "_g" + idx;
}

ValidationReport validate_script(const ConversationScript& script, std::size_t max_speakers,
                                 AdjacentSpeakerPolicy adjacent) {
  ValidationReport report;
  if (script.empty()) report.violations.push_back("script has no turns");
  if (script.speaker_count() > max_speakers) {
    report.violations.push_back("speaker_count " + std::to_string(script.speaker_count()) + " > " +
                                std::to_string(max_speakers));
  }
  const auto& turns = script.turns();
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const auto& t = turns[i];
    if (t.index != i) report.violations.push_back("turn index " + std::to_string(t.index) +
                                                  " at position " + std::to_string(i));
    if (t.speaker.label.empty())
      report.violations.push_back("empty speaker label at index " + std::to_string(i));
    if (blank(t.text)) report.violations.push_back("empty turn at index " + std::to_string(i));
    if (adjacent == AdjacentSpeakerPolicy::flag && i > 0 && turns[i - 1].speaker == t.speaker)
      report.violations.push_back("same speaker in adjacent turns at index " + std::to_string(i));
  }
  return report;
}

}  // namespace convsynth
