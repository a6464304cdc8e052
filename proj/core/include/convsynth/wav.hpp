#pragma once

#include <filesystem>
#include <string>

#include "convsynth/types.hpp"

namespace convsynth {

enum class WavFormat { pcm16, float32 };

// RIFF/WAVE encoding of a mono clip. PCM16 rounds to nearest and saturates.
std::string encode_wav(const AudioClip& clip, WavFormat format = WavFormat::pcm16);

// Accepts PCM16 and IEEE float32 (also WAVE_FORMAT_EXTENSIBLE). Multi-channel
// input is mixed down to mono by averaging.
AudioClip decode_wav(const std::string& bytes);

void write_wav(const std::filesystem::path& path, const AudioClip& clip,
               WavFormat format = WavFormat::pcm16);
AudioClip read_wav(const std::filesystem::path& path);

}  // namespace convsynth
