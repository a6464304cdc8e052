#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "convsynth/types.hpp"

namespace convsynth {

// Thrown for structurally invalid manifest content; `line` is 1-based.
class ManifestError : public std::runtime_error {
 public:
  ManifestError(std::size_t line, const std::string& what)
      : std::runtime_error("manifest line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// One JSON object per line:
//   {"id", "audio_path", "sample_rate", "duration", "provenance", "seed",
//    "sot_text", "segments": [{"speaker", "start", "end", "text", "group"?}],
//    "discarded_groups": [..]}
// Segment times are written with 1 ms precision, durations with 1 us.
std::string manifest_line(const ManifestRecord& record);
ManifestRecord parse_manifest_line(const std::string& line, std::size_t line_no = 1);

void write_manifest(const DatasetManifest& records, const std::filesystem::path& path);

// Blank lines are skipped. Audio paths are resolved against the manifest's
// directory; unresolved ones set ManifestRecord::audio_missing.
DatasetManifest read_manifest(const std::filesystem::path& path);

// Rounds to the serialized time grids.
double round_ms(double seconds);
double round_us(double seconds);

// Writes via a sibling temp file and rename.
void atomic_write(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace convsynth
