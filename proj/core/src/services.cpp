#include "convsynth/services.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstring>
#include <map>
#include <numbers>
#include <semaphore>
#include <set>
#include <sstream>
#include <thread>

#include "convsynth/rng.hpp"
#include "convsynth/transcript_gen.hpp"
#include "convsynth/wav.hpp"
#include "httplib.h"
#include "json.hpp"

namespace convsynth {

using json = nlohmann::json;

namespace {

std::vector<std::string> split_words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> words;
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::size_t seconds_to_samples(double seconds, int rate) {
  return static_cast<std::size_t>(std::llround(seconds * rate));
}

std::string base64_decode(const std::string& in) {
  static const auto table = [] {
    std::array<int, 256> t{};
    t.fill(-1);
    const char* alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    for (int i = 0; i < 64; ++i) t[static_cast<unsigned char>(alphabet[i])] = i;
    return t;
  }();
  std::string out;
  out.reserve(in.size() * 3 / 4);
  unsigned buffer = 0;
  int bits = 0;
  for (unsigned char c : in) {
    if (c == '=' || std::isspace(c)) continue;
    const int v = table[c];
    if (v < 0) throw ServiceError("malformed response: invalid base64", false);
    buffer = (buffer << 6) | static_cast<unsigned>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((buffer >> bits) & 0xFF));
    }
  }
  return out;
}

const std::vector<std::string>& builtin_vocabulary() {
  static const std::vector<std::string> words = {
      "actually", "and", "around", "back", "because", "before", "better", "coffee", "could",
      "different", "every", "family", "feel", "going", "good", "guess", "honestly", "idea",
      "just", "kind", "know", "last", "little", "lot", "maybe", "mean", "morning", "music",
      "night", "okay", "people", "pretty", "really", "right", "school", "something", "sort",
      "sure", "thing", "think", "time", "today", "weekend", "well", "work", "yeah", "year", "you"};
  return words;
}

}  // namespace

void validate_request(const CompletionRequest& req) {
  if (req.prompt.empty()) throw ServiceError("empty prompt", false);
  if (req.max_tokens <= 0) throw ServiceError("max_tokens must be positive", false);
  if (!(req.temperature >= 0.0)) throw ServiceError("temperature must be >= 0", false);
}

void validate_request(const TtsUtteranceRequest& req) {
  if (blank(req.text)) throw ServiceError("empty text", false);
  if (req.target_sample_rate <= 0) throw ServiceError("target_sample_rate must be positive", false);
}

void validate_request(const ConvTtsRequest& req) {
  if (!(req.max_duration > 0.0 && req.max_duration <= 30.0))
    throw ServiceError("max_duration must lie in (0, 30] s", false);
  const auto report = validate_script(req.script, 2);
  if (!report.ok()) throw ServiceError("invalid script: " + report.violations.front(), false);
}

double mock_tone_frequency(const std::string& word, const std::string& voice) {
  const std::uint64_t h = fnv1a(voice, fnv1a(word + '\x1f'));
  return 200.0 + static_cast<double>(h % 1801);
}

AudioClip mock_speech(const std::string& text, const std::string& voice, int sample_rate) {
  const auto words = split_words(text);
  const std::size_t word_len = seconds_to_samples(kMockWordDuration, sample_rate);
  const std::size_t fade = std::min(word_len / 2, seconds_to_samples(0.005, sample_rate));
  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.reserve(words.size() * word_len);
  for (const auto& w : words) {
    const double f = mock_tone_frequency(w, voice);
    for (std::size_t i = 0; i < word_len; ++i) {
      double gain = kMockToneAmplitude;
      const std::size_t edge = std::min(i, word_len - 1 - i);
      if (edge < fade) gain *= 0.5 - 0.5 * std::cos(std::numbers::pi * (edge + 0.5) / fade);
      clip.samples.push_back(gain * std::sin(2.0 * std::numbers::pi * f * i / sample_rate));
    }
  }
  return clip;
}

std::string MockCompletionService::complete(const CompletionRequest& req) {
  validate_request(req);
  const std::uint64_t seed = req.seed.value_or(default_seed_);
  Rng rng(derive_seed(seed, "mock-completion", fnv1a(req.prompt)));

  std::set<std::string> vocab_set;
  std::string word;
  auto flush = [&] {
    if (word.size() >= 2) vocab_set.insert(word);
    word.clear();
  };
  bool in_tag = false;
  for (unsigned char c : req.prompt) {
    if (c == '[') in_tag = true;
    if (in_tag) {
      if (c == ']') in_tag = false;
      flush();
      continue;
    }
    if (std::isalpha(c)) {
      word.push_back(static_cast<char>(std::tolower(c)));
    } else if (c != '\'') {
      flush();
    }
  }
  flush();
  const std::vector<std::string> vocab =
      vocab_set.size() >= 20 ? std::vector<std::string>(vocab_set.begin(), vocab_set.end())
                             : builtin_vocabulary();

  const std::size_t turns = 2 + rng.index(5);
  std::string out;
  int speaker = 1;
  bool seen_other = false;
  for (std::size_t t = 0; t < turns; ++t) {
    if (t > 0 && rng.bernoulli(0.85)) speaker = 3 - speaker;
    if (t + 1 == turns && !seen_other) speaker = 2;
    seen_other = seen_other || speaker == 2;
    if (!out.empty()) out += ' ';
    out += "[S" + std::to_string(speaker) + "]";
    const std::size_t words = 3 + rng.index(7);
    for (std::size_t w = 0; w < words; ++w) out += ' ' + vocab[rng.index(vocab.size())];
  }
  return out;
}

std::vector<std::string> default_mock_voices() {
  std::vector<std::string> v;
  for (int i = 0; i < 8; ++i) v.push_back("voice_0" + std::to_string(i));
  return v;
}

AudioClip MockTtsService::synthesize_utterance(const TtsUtteranceRequest& req) {
  validate_request(req);
  if (std::find(voices_.begin(), voices_.end(), req.speaker_ref) == voices_.end())
    throw ServiceError("unknown speaker_ref '" + req.speaker_ref + "'", false);
  const std::size_t pad = seconds_to_samples(kMockPadding, req.target_sample_rate);
  AudioClip speech = mock_speech(req.text, req.speaker_ref, req.target_sample_rate);
  AudioClip clip;
  clip.sample_rate = req.target_sample_rate;
  clip.samples.assign(pad, 0.0);
  clip.samples.insert(clip.samples.end(), speech.samples.begin(), speech.samples.end());
  clip.samples.resize(clip.samples.size() + pad, 0.0);
  return clip;
}

namespace {

struct TurnPlacement {
  std::size_t start;  // samples
  std::size_t length;
};

std::vector<TurnPlacement> layout_turns(const ConversationScript& script, int rate, double overlap,
                                        double pause, std::size_t& total) {
  const std::size_t word_len = seconds_to_samples(kMockWordDuration, rate);
  const std::size_t pad = seconds_to_samples(kMockPadding, rate);
  const std::size_t pause_len = seconds_to_samples(pause, rate);
  std::vector<TurnPlacement> out;
  std::map<SpeakerId, std::size_t> last_end;
  std::size_t cursor = pad;
  std::size_t max_end = pad;
  for (const auto& turn : script.turns()) {
    const std::size_t len = split_words(turn.text).size() * word_len;
    std::size_t start = cursor;
    if (!out.empty()) {
      const auto& prev = out.back();
      const std::size_t prev_end = prev.start + prev.length;
      const bool change = script.turns()[out.size() - 1].speaker != turn.speaker;
      if (change && overlap > 0.0) {
        const std::size_t ov = std::min(seconds_to_samples(overlap, rate), prev.length / 2);
        start = prev_end - ov;
      } else {
        start = prev_end + pause_len;
      }
      if (auto it = last_end.find(turn.speaker); it != last_end.end()) start = std::max(start, it->second);
    }
    out.push_back({start, len});
    last_end[turn.speaker] = start + len;
    max_end = std::max(max_end, start + len);
    cursor = start + len;
  }
  total = max_end + pad;
  return out;
}

}  // namespace

double MockConvTtsService::estimate_duration(const ConversationScript& script) const {
  std::size_t total = 0;
  layout_turns(script, sample_rate_, overlap_, pause_, total);
  return static_cast<double>(total) / sample_rate_;
}

ConvTtsResult MockConvTtsService::synthesize_conversation(const ConvTtsRequest& req) {
  validate_request(req);
  std::size_t total = 0;
  const auto placements = layout_turns(req.script, sample_rate_, overlap_, pause_, total);
  if (static_cast<double>(total) / sample_rate_ > req.max_duration)
    throw ServiceError("script too long", false);

  ConvTtsResult r;
  r.audio.sample_rate = sample_rate_;
  r.audio.samples.assign(total, 0.0);
  for (std::size_t i = 0; i < placements.size(); ++i) {
    const auto& turn = req.script.turns()[i];
    const AudioClip speech = mock_speech(turn.text, turn.speaker.label, sample_rate_);
    const auto& p = placements[i];
    for (std::size_t k = 0; k < speech.samples.size(); ++k) r.audio.samples[p.start + k] += speech.samples[k];
    UtteranceSegment seg;
    seg.speaker = turn.speaker;
    seg.start = static_cast<double>(p.start) / sample_rate_;
    seg.end = static_cast<double>(p.start + p.length) / sample_rate_;
    seg.text = turn.text;
    r.segments.push_back(std::move(seg));
  }
  std::stable_sort(r.segments.begin(), r.segments.end(),
                   [](const auto& a, const auto& b) { return a.start < b.start; });
  peak_guard(r.audio);
  return r;
}

// ---- HTTP ------------------------------------------------------------------

namespace detail {

class HttpJsonClient {
 public:
  explicit HttpJsonClient(const HttpEndpoint& endpoint)
      : endpoint_(endpoint), slots_(std::max(1, endpoint.max_in_flight)) {
    const auto scheme_end = endpoint.url.find("://");
    if (scheme_end == std::string::npos || endpoint.url.substr(0, scheme_end) != "http")
      throw std::invalid_argument("endpoint must be an http:// URL: '" + endpoint.url + "'");
    const auto path_start = endpoint.url.find('/', scheme_end + 3);
    origin_ = endpoint.url.substr(0, path_start);
    if (path_start != std::string::npos) base_path_ = endpoint.url.substr(path_start);
    while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
  }

  json post(const std::string& route, const json& body) {
    const std::string path = base_path_ + route;
    const std::string payload = body.dump();
    const int attempts = std::max(1, endpoint_.retry.max_attempts);
    auto backoff = std::chrono::duration<double, std::milli>(endpoint_.retry.initial_backoff);
    std::string last_error;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
      httplib::Result res{nullptr, httplib::Error::Unknown};
      {
        slots_.acquire();
        httplib::Client cli(origin_);
        const auto t = endpoint_.timeout.count();
        cli.set_connection_timeout(t, 0);
        cli.set_read_timeout(t, 0);
        cli.set_write_timeout(t, 0);
        httplib::Headers headers;
        if (!endpoint_.token.empty()) headers.emplace("Authorization", "Bearer " + endpoint_.token);
        res = cli.Post(path, headers, payload, "application/json");
        slots_.release();
      }
      if (!res) {
        last_error = "transport failure: " + httplib::to_string(res.error());
      } else if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
      } else if (res->status < 200 || res->status >= 300) {
        throw ServiceError("HTTP " + std::to_string(res->status) + " from " + route + ": " + res->body,
                           false, attempt);
      } else {
        try {
          return json::parse(res->body);
        } catch (const json::parse_error&) {
          throw ServiceError("malformed response from " + route, false, attempt);
        }
      }
      if (attempt < attempts) {
        std::this_thread::sleep_for(backoff);
        backoff *= endpoint_.retry.multiplier;
      }
    }
    throw ServiceError(last_error + " (" + route + ") after " + std::to_string(attempts) + " attempts",
                       true, attempts);
  }

 private:
  HttpEndpoint endpoint_;
  std::counting_semaphore<1024> slots_;
  std::string origin_;
  std::string base_path_;
};

}  // namespace detail

namespace {

template <typename T>
T response_field(const json& j, const char* key, const char* route) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ServiceError(std::string("malformed response from ") + route + ": field '" + key + "'", false);
  }
}

AudioClip response_audio(const json& j, const char* route) {
  if (j.contains("audio_path")) {
    try {
      return read_wav(response_field<std::string>(j, "audio_path", route));
    } catch (const std::runtime_error& e) {
      throw ServiceError(std::string("cannot read audio returned by ") + route + ": " + e.what(), false);
    }
  }
  AudioClip clip;
  clip.sample_rate = response_field<int>(j, "sample_rate", route);
  if (clip.sample_rate <= 0) throw ServiceError(std::string("malformed response from ") + route, false);
  const std::string pcm = base64_decode(response_field<std::string>(j, "pcm16_base64", route));
  clip.samples.resize(pcm.size() / 2);
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    std::int16_t v;
    std::memcpy(&v, pcm.data() + 2 * i, 2);
    clip.samples[i] = std::max(-1.0, v / 32767.0);
  }
  return clip;
}

}  // namespace

HttpCompletionService::HttpCompletionService(const HttpEndpoint& endpoint)
    : client_(std::make_shared<detail::HttpJsonClient>(endpoint)) {}

std::string HttpCompletionService::complete(const CompletionRequest& req) {
  validate_request(req);
  json body = {{"prompt", req.prompt}, {"max_tokens", req.max_tokens}, {"temperature", req.temperature}};
  if (req.seed) body["seed"] = *req.seed;
  return response_field<std::string>(client_->post("/v1/complete", body), "text", "/v1/complete");
}

HttpTtsService::HttpTtsService(const HttpEndpoint& endpoint)
    : client_(std::make_shared<detail::HttpJsonClient>(endpoint)) {}

AudioClip HttpTtsService::synthesize_utterance(const TtsUtteranceRequest& req) {
  validate_request(req);
  const json body = {{"text", req.text},
                     {"speaker_ref", req.speaker_ref},
                     {"target_sample_rate", req.target_sample_rate}};
  return response_audio(client_->post("/v1/tts", body), "/v1/tts");
}

std::vector<std::string> HttpTtsService::voices() const {
  return response_field<std::vector<std::string>>(client_->post("/v1/voices", json::object()),
                                                   "voices", "/v1/voices");
}

HttpConvTtsService::HttpConvTtsService(const HttpEndpoint& endpoint)
    : client_(std::make_shared<detail::HttpJsonClient>(endpoint)) {}

ConvTtsResult HttpConvTtsService::synthesize_conversation(const ConvTtsRequest& req) {
  validate_request(req);
  const json body = {{"script", render_script(req.script)}, {"max_duration", req.max_duration}};
  const json resp = client_->post("/v1/conv_tts", body);
  ConvTtsResult r;
  r.audio = response_audio(resp, "/v1/conv_tts");
  for (const auto& sj : response_field<json>(resp, "segments", "/v1/conv_tts")) {
    UtteranceSegment s;
    s.speaker = SpeakerId(response_field<std::string>(sj, "speaker", "/v1/conv_tts"));
    s.start = response_field<double>(sj, "start", "/v1/conv_tts");
    s.end = response_field<double>(sj, "end", "/v1/conv_tts");
    s.text = response_field<std::string>(sj, "text", "/v1/conv_tts");
    try {
      check_segment(s);
    } catch (const std::invalid_argument& e) {
      throw ServiceError(std::string("malformed segment from /v1/conv_tts: ") + e.what(), false);
    }
    r.segments.push_back(std::move(s));
  }
  std::stable_sort(r.segments.begin(), r.segments.end(),
                   [](const auto& a, const auto& b) { return a.start < b.start; });
  return r;
}

std::unique_ptr<CompletionService> make_completion_service(const ServiceConfig& cfg) {
  if (cfg.backend == "mock") return std::make_unique<MockCompletionService>(cfg.seed);
  if (cfg.backend == "http") return std::make_unique<HttpCompletionService>(cfg.endpoint);
  throw std::invalid_argument("unknown backend '" + cfg.backend + "'");
}

std::unique_ptr<UtteranceTtsService> make_tts_service(const ServiceConfig& cfg) {
  if (cfg.backend == "mock") return std::make_unique<MockTtsService>();
  if (cfg.backend == "http") return std::make_unique<HttpTtsService>(cfg.endpoint);
  throw std::invalid_argument("unknown backend '" + cfg.backend + "'");
}

std::unique_ptr<ConversationTtsService> make_conv_tts_service(const ServiceConfig& cfg) {
  if (cfg.backend == "mock")
    return std::make_unique<MockConvTtsService>(cfg.mock_conv_rate, cfg.mock_conv_overlap);
  if (cfg.backend == "http") return std::make_unique<HttpConvTtsService>(cfg.endpoint);
  throw std::invalid_argument("unknown backend '" + cfg.backend + "'");
}

}  // namespace convsynth
