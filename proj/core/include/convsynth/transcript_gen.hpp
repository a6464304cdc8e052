#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "convsynth/services.hpp"
#include "convsynth/types.hpp"

namespace convsynth {

// Pool of tagged example transcripts used as few-shot examples.
struct SeedPool {
  std::vector<std::string> examples;
  std::string source_id;
};

enum class PoolFormat { line, block };

// One transcript per line, or per blank-line-separated block. Every example
// must parse; otherwise std::runtime_error names the offending entry.
SeedPool load_seed_pool(const std::filesystem::path& path, PoolFormat format = PoolFormat::line);

struct PromptSpec {
  std::size_t k_shots = 8;
  std::string delimiter = "\n\n";
  std::string instruction_header;  // prepended (followed by the delimiter) when non-empty
  std::uint64_t rng_seed = 0;
};

// Concatenates k distinct pool examples, drawn without replacement in sampled
// order, each followed by the delimiter.
std::string build_prompt(const SeedPool& pool, const PromptSpec& spec);

class ScriptParseError : public std::runtime_error {
 public:
  enum class Reason { no_tags, text_before_first_tag, empty_turn, bad_tag_index };
  ScriptParseError(Reason reason, const std::string& what)
      : std::runtime_error(what), reason_(reason) {}
  Reason reason() const { return reason_; }

 private:
  Reason reason_;
};

std::string to_string(ScriptParseError::Reason r);

// Parses "[S1] hi there [S2] hello". Tags match `[S<digits>]` with a positive
// index; turn text is trimmed and internal whitespace collapsed.
ConversationScript parse_script(const std::string& text);

// Inverse of parse_script for scripts whose texts are whitespace-normalized.
std::string render_script(const ConversationScript& script);

struct ScriptPolicy {
  std::size_t max_speakers = 2;
  AdjacentSpeakerPolicy adjacent = AdjacentSpeakerPolicy::allow;
  int attempts_per_item = 5;
  int max_tokens = 512;
  double temperature = 0.8;
  std::size_t jobs = 4;
};

struct GenerationResult {
  std::vector<ConversationScript> scripts;  // in request order
  std::map<std::string, std::size_t> rejections;  // reason -> count
  std::size_t shortfall = 0;  // items that exhausted their attempts

  bool ok() const { return shortfall == 0; }
};

// Generates n scripts. Item i, attempt a uses a prompt sampled with sub-seed
// derive_seed(spec.rng_seed, "item", i * attempts + a), so output is independent
// of scheduling.
GenerationResult generate_scripts(const SeedPool& pool, const PromptSpec& spec, std::size_t n,
                                  const ScriptPolicy& policy, CompletionService& service);

}  // namespace convsynth
