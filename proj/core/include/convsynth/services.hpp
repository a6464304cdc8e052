#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "convsynth/types.hpp"

namespace convsynth {

// Failure talking to a backend. Retryable errors are transport-level
// (connection refused, timeouts, 5xx, 429) and have already been retried by
// the client when they surface here.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(const std::string& what, bool retryable, int attempts = 1)
      : std::runtime_error(what), retryable_(retryable), attempts_(attempts) {}
  bool retryable() const { return retryable_; }
  int attempts() const { return attempts_; }

 private:
  bool retryable_;
  int attempts_;
};

struct CompletionRequest {
  std::string prompt;
  int max_tokens = 512;
  double temperature = 0.8;
  std::optional<std::uint64_t> seed;
};

struct TtsUtteranceRequest {
  std::string text;
  std::string speaker_ref;  // opaque enrollment handle
  int target_sample_rate = 16000;
};

struct ConvTtsRequest {
  ConversationScript script;
  double max_duration = 30.0;
};

struct ConvTtsResult {
  AudioClip audio;
  std::vector<UtteranceSegment> segments;  // ordered by start
};

// Request checks shared by all backends; throw non-retryable ServiceError.
void validate_request(const CompletionRequest& req);
void validate_request(const TtsUtteranceRequest& req);
void validate_request(const ConvTtsRequest& req);

class CompletionService {
 public:
  virtual ~CompletionService() = default;
  virtual std::string complete(const CompletionRequest& req) = 0;
};

class UtteranceTtsService {
 public:
  virtual ~UtteranceTtsService() = default;
  virtual AudioClip synthesize_utterance(const TtsUtteranceRequest& req) = 0;
  // Enrollment handles this backend accepts.
  virtual std::vector<std::string> voices() const = 0;
};

class ConversationTtsService {
 public:
  virtual ~ConversationTtsService() = default;
  virtual ConvTtsResult synthesize_conversation(const ConvTtsRequest& req) = 0;
};

// ---- deterministic mocks -------------------------------------------------

// Each word becomes a tone of this length; clips carry this much silence on
// both ends.
inline constexpr double kMockWordDuration = 0.30;
inline constexpr double kMockPadding = 0.12;
inline constexpr double kMockToneAmplitude = 0.5;

// Tone frequency in [200, 2000] Hz, a hash of (word, voice).
double mock_tone_frequency(const std::string& word, const std::string& voice);

// Concatenated word tones without padding.
AudioClip mock_speech(const std::string& text, const std::string& voice, int sample_rate);

// Emits a tagged two-speaker conversation. Words are drawn from the prompt's
// vocabulary (falling back to a built-in list), so output is a pure function
// of (prompt, seed).
class MockCompletionService final : public CompletionService {
 public:
  explicit MockCompletionService(std::uint64_t default_seed = 0) : default_seed_(default_seed) {}
  std::string complete(const CompletionRequest& req) override;

 private:
  std::uint64_t default_seed_;
};

std::vector<std::string> default_mock_voices();

class MockTtsService final : public UtteranceTtsService {
 public:
  explicit MockTtsService(std::vector<std::string> voices = default_mock_voices())
      : voices_(std::move(voices)) {}
  AudioClip synthesize_utterance(const TtsUtteranceRequest& req) override;
  std::vector<std::string> voices() const override { return voices_; }

 private:
  std::vector<std::string> voices_;
};

// Realizes turns back to back at `sample_rate`. Consecutive turns by
// different speakers overlap by `overlap` seconds (capped at half the
// previous turn); otherwise they are separated by `pause` seconds.
class MockConvTtsService final : public ConversationTtsService {
 public:
  explicit MockConvTtsService(int sample_rate = 44100, double overlap = 0.0, double pause = 0.2)
      : sample_rate_(sample_rate), overlap_(overlap), pause_(pause) {}
  ConvTtsResult synthesize_conversation(const ConvTtsRequest& req) override;

  // Length the realized clip would have, in seconds.
  double estimate_duration(const ConversationScript& script) const;

 private:
  int sample_rate_;
  double overlap_;
  double pause_;
};

// ---- HTTP backends -------------------------------------------------------
//
// JSON request/response over HTTP POST:
//   {endpoint}/v1/complete   {"prompt","max_tokens","temperature","seed"?}
//                            -> {"text"}
//   {endpoint}/v1/tts        {"text","speaker_ref","target_sample_rate"}
//                            -> audio
//   {endpoint}/v1/conv_tts   {"script","max_duration"}  (script in tagged form)
//                            -> audio + {"segments":[{"speaker","start","end","text"}]}
//   {endpoint}/v1/voices     {} -> {"voices":[...]}
// where audio is {"sample_rate","pcm16_base64"} (mono little-endian PCM16)
// or {"audio_path"} naming a WAV file readable by this process.
// A non-empty token is sent as "Authorization: Bearer <token>".

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  double multiplier = 2.0;
};

struct HttpEndpoint {
  std::string url;  // http://host:port[/base]
  std::string token;
  int max_in_flight = 4;
  RetryPolicy retry;
  std::chrono::seconds timeout{120};
};

namespace detail {
class HttpJsonClient;
}

class HttpCompletionService final : public CompletionService {
 public:
  explicit HttpCompletionService(const HttpEndpoint& endpoint);
  std::string complete(const CompletionRequest& req) override;

 private:
  std::shared_ptr<detail::HttpJsonClient> client_;
};

class HttpTtsService final : public UtteranceTtsService {
 public:
  explicit HttpTtsService(const HttpEndpoint& endpoint);
  AudioClip synthesize_utterance(const TtsUtteranceRequest& req) override;
  std::vector<std::string> voices() const override;

 private:
  std::shared_ptr<detail::HttpJsonClient> client_;
};

class HttpConvTtsService final : public ConversationTtsService {
 public:
  explicit HttpConvTtsService(const HttpEndpoint& endpoint);
  ConvTtsResult synthesize_conversation(const ConvTtsRequest& req) override;

 private:
  std::shared_ptr<detail::HttpJsonClient> client_;
};

// Backend selection by name: "mock" or "http".
struct ServiceConfig {
  std::string backend = "mock";
  HttpEndpoint endpoint;
  std::uint64_t seed = 0;
  int mock_conv_rate = 44100;
  double mock_conv_overlap = 0.0;
};

std::unique_ptr<CompletionService> make_completion_service(const ServiceConfig& cfg);
std::unique_ptr<UtteranceTtsService> make_tts_service(const ServiceConfig& cfg);
std::unique_ptr<ConversationTtsService> make_conv_tts_service(const ServiceConfig& cfg);

}  // namespace convsynth
