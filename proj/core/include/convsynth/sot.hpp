#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "convsynth/types.hpp"

namespace convsynth {

// Lowercases, strips punctuation except intra-word apostrophes, expands a
// small abbreviation table and collapses whitespace. Idempotent.
std::string normalize_text(std::string_view s);

using Normalizer = std::function<std::string(std::string_view)>;

struct SotConfig {
  std::string change_token = "<sc>";
};

// Throws std::invalid_argument if the token is empty, contains whitespace, or
// would survive normalize_text unchanged (i.e. could be a normal word).
void check_sot_config(const SotConfig& cfg);

// Joins segment texts in start-time order (ties: speaker, then text),
// inserting the change token between consecutive segments of different
// speakers. Segments with blank text are skipped.
std::string serialize_group(const UtteranceGroup& group, const SotConfig& cfg = {});

// Speaker changes along the serialization order of `group`.
std::size_t speaker_changes(const UtteranceGroup& group);

struct SotChunk {
  std::size_t channel = 0;
  std::string text;

  friend bool operator==(const SotChunk&, const SotChunk&) = default;
};

struct DeserializedSot {
  std::vector<SotChunk> chunks;
  std::size_t empty_chunks = 0;  // dropped blank chunks
};

// Splits on the change token; the channel index advances once per token.
DeserializedSot deserialize_sot(const std::string& sot_text, const SotConfig& cfg = {});

}  // namespace convsynth
