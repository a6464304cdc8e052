#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "convsynth/types.hpp"

namespace convsynth {

struct GroupingParams {
  // Two segments link when the gap between them, max(starts) - min(ends), is
  // below this value. 0 links only segments that overlap in time.
  double gap_threshold = 0.0;
  double max_span = 30.0;
};

struct Grouping {
  std::vector<UtteranceGroup> groups;     // span <= max_span, ordered by span_start
  std::vector<UtteranceGroup> discarded;  // span > max_span
};

// Transitive closure of the link relation, computed by a sweep over start
// times. The result does not depend on input order.
Grouping group_utterances(const std::vector<UtteranceSegment>& segments,
                          const GroupingParams& params = {});

struct GroupingStats {
  std::size_t groups = 0;
  std::size_t discarded = 0;
};

// Labels every segment of every record with its group index (numbered by
// span start across kept and discarded groups) and lists discarded indices
// in ManifestRecord::discarded_groups.
GroupingStats attach_groups(DatasetManifest& manifest, const GroupingParams& params = {});

// Reads either NIST RTTM lines ("SPEAKER <file> <chan> <start> <dur> <NA> <NA> <speaker> ...")
// or plain "<speaker> <start> <duration>" lines (recording id "").
// Returns segments keyed by recording id. Malformed lines throw with their number.
std::map<std::string, std::vector<UtteranceSegment>> read_segment_file(const std::filesystem::path& path);

}  // namespace convsynth
