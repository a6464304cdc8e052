#include "convsynth/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>

#include "convsynth/manifest.hpp"

namespace convsynth {

namespace {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t pos) {
  if (pos + sizeof(T) > in.size()) throw std::runtime_error("truncated WAV data");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  return v;
}

}  // namespace

std::string encode_wav(const AudioClip& clip, WavFormat format) {
  if (clip.sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  const std::uint16_t bits = format == WavFormat::pcm16 ? 16 : 32;
  const std::uint16_t block = bits / 8;
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * block);

  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put<std::uint32_t>(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put<std::uint32_t>(out, 16);
  put<std::uint16_t>(out, format == WavFormat::pcm16 ? kFormatPcm : kFormatFloat);
  put<std::uint16_t>(out, 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(clip.sample_rate));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(clip.sample_rate) * block);
  put<std::uint16_t>(out, block);
  put<std::uint16_t>(out, bits);
  out += "data";
  put<std::uint32_t>(out, data_bytes);
  for (double s : clip.samples) {
    if (format == WavFormat::pcm16) {
      const double q = std::round(std::clamp(s, -1.0, 1.0) * 32767.0);
      put<std::int16_t>(out, static_cast<std::int16_t>(q));
    } else {
      put<float>(out, static_cast<float>(s));
    }
  }
  return out;
}

AudioClip decode_wav(const std::string& bytes) {
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0)
    throw std::runtime_error("not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id = bytes.substr(pos, 4);
    const auto size = get<std::uint32_t>(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      format = get<std::uint16_t>(bytes, body);
      channels = get<std::uint16_t>(bytes, body + 2);
      rate = get<std::uint32_t>(bytes, body + 4);
      bits = get<std::uint16_t>(bytes, body + 14);
      if (format == kFormatExtensible && size >= 40) format = get<std::uint16_t>(bytes, body + 24);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw std::runtime_error("WAV data chunk precedes fmt chunk");
      if (channels == 0 || rate == 0) throw std::runtime_error("invalid WAV fmt chunk");
      const bool pcm16 = format == kFormatPcm && bits == 16;
      const bool f32 = format == kFormatFloat && bits == 32;
      if (!pcm16 && !f32) throw std::runtime_error("unsupported WAV encoding (need PCM16 or float32)");
      const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
      const std::size_t frame_bytes = static_cast<std::size_t>(channels) * bits / 8;
      const std::size_t frames = avail / frame_bytes;

      AudioClip clip;
      clip.sample_rate = static_cast<int>(rate);
      clip.samples.resize(frames);
      for (std::size_t f = 0; f < frames; ++f) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
          const std::size_t at = body + f * frame_bytes + c * (bits / 8);
          acc += pcm16 ? std::max(-1.0, get<std::int16_t>(bytes, at) / 32767.0) : static_cast<double>(get<float>(bytes, at));
        }
        clip.samples[f] = acc / channels;
      }
      return clip;
    }
    pos = body + size + (size & 1u);
  }
  throw std::runtime_error("WAV file has no data chunk");
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip, WavFormat format) {
  atomic_write(path, encode_wav(clip, format));
}

AudioClip read_wav(const std::filesystem::path& path) { return decode_wav(read_file(path)); }

}  // namespace convsynth
