#include "convsynth/segmenter.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace convsynth {

namespace {

// Group id of each input segment plus the number of groups, numbered in
// order of their earliest segment.
std::vector<std::size_t> assign_groups(const std::vector<UtteranceSegment>& segments,
                                       const GroupingParams& params, std::size_t& count) {
  if (params.gap_threshold < 0.0) throw std::invalid_argument("gap_threshold must be >= 0");
  if (!(params.max_span > 0.0)) throw std::invalid_argument("max_span must be > 0");
  for (const auto& s : segments) check_segment(s);

  std::vector<std::size_t> order(segments.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return segment_less(segments[a], segments[b]);
  });

  std::vector<std::size_t> group_of(segments.size());
  count = 0;
  double group_end = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& s = segments[order[k]];
    // Starts are sorted, so the gap to the group is s.start - min(group_end, s.end).
    const bool joins = k > 0 && s.start - std::min(group_end, s.end) < params.gap_threshold;
    if (!joins) {
      ++count;
      group_end = s.end;
    } else {
      group_end = std::max(group_end, s.end);
    }
    group_of[order[k]] = count - 1;
  }
  return group_of;
}

}  // namespace

Grouping group_utterances(const std::vector<UtteranceSegment>& segments, const GroupingParams& params) {
  std::size_t count = 0;
  const auto group_of = assign_groups(segments, params, count);
  std::vector<std::vector<UtteranceSegment>> buckets(count);
  for (std::size_t i = 0; i < segments.size(); ++i) buckets[group_of[i]].push_back(segments[i]);

  Grouping out;
  for (auto& b : buckets) {
    UtteranceGroup g = make_group(std::move(b));
    (g.span() > params.max_span ? out.discarded : out.groups).push_back(std::move(g));
  }
  return out;
}

GroupingStats attach_groups(DatasetManifest& manifest, const GroupingParams& params) {
  GroupingStats stats;
  for (auto& record : manifest) {
    std::size_t count = 0;
    const auto group_of = assign_groups(record.segments, params, count);
    std::vector<double> lo(count, 0.0), hi(count, 0.0);
    std::vector<bool> seen(count, false);
    for (std::size_t i = 0; i < record.segments.size(); ++i) {
      const auto& s = record.segments[i];
      const std::size_t g = group_of[i];
      lo[g] = seen[g] ? std::min(lo[g], s.start) : s.start;
      hi[g] = seen[g] ? std::max(hi[g], s.end) : s.end;
      seen[g] = true;
      record.segments[i].group = g;
    }
    record.discarded_groups.clear();
    for (std::size_t g = 0; g < count; ++g) {
      if (hi[g] - lo[g] > params.max_span) {
        record.discarded_groups.push_back(g);
        ++stats.discarded;
      } else {
        ++stats.groups;
      }
    }
  }
  return stats;
}

std::map<std::string, std::vector<UtteranceSegment>> read_segment_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open segment file " + path.string());
  std::map<std::string, std::vector<UtteranceSegment>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::vector<std::string> f;
    for (std::string tok; fields >> tok;) f.push_back(tok);
    if (f.empty() || f[0].starts_with("#")) continue;

    std::string recording, speaker, start, dur;
    if (f[0] == "SPEAKER") {
      if (f.size() < 8) throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": short RTTM line");
      recording = f[1];
      start = f[3];
      dur = f[4];
      speaker = f[7];
    } else {
      if (f.size() != 3) throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected '<speaker> <start> <duration>'");
      speaker = f[0];
      start = f[1];
      dur = f[2];
    }
    UtteranceSegment seg;
    seg.speaker = SpeakerId(speaker);
    try {
      std::size_t used = 0;
      seg.start = std::stod(start, &used);
      if (used != start.size()) throw std::invalid_argument(start);
      const double d = std::stod(dur, &used);
      if (used != dur.size()) throw std::invalid_argument(dur);
      seg.end = seg.start + d;
      check_segment(seg);
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": invalid segment timing (" + e.what() + ")");
    }
    out[recording].push_back(std::move(seg));
  }
  return out;
}

}  // namespace convsynth
