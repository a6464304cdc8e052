#include "convsynth/manifest.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace convsynth {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

double round_ms(double seconds) { return std::round(seconds * 1000.0) / 1000.0; }
double round_us(double seconds) { return std::round(seconds * 1e6) / 1e6; }

std::string manifest_line(const ManifestRecord& r) {
  json segs = json::array();
  for (const auto& s : r.segments) {
    json j = {{"speaker", s.speaker.label},
              {"start", round_ms(s.start)},
              {"end", round_ms(s.end)},
              {"text", s.text}};
    if (s.group) j["group"] = *s.group;
    segs.push_back(std::move(j));
  }
  json j = {{"id", r.id},
            {"audio_path", r.audio_path},
            {"sample_rate", r.sample_rate},
            {"duration", round_us(r.duration)},
            {"provenance", to_string(r.provenance)},
            {"seed", r.seed},
            {"sot_text", r.sot_text},
            {"segments", std::move(segs)},
            {"discarded_groups", r.discarded_groups}};
  return j.dump();
}

namespace {

template <typename T>
T field(const json& j, const char* key, std::size_t line_no) {
  auto it = j.find(key);
  if (it == j.end()) throw ManifestError(line_no, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ManifestError(line_no, std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

ManifestRecord parse_manifest_line(const std::string& line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ManifestError(line_no, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ManifestError(line_no, "expected a JSON object");

  ManifestRecord r;
  r.id = field<std::string>(j, "id", line_no);
  r.audio_path = field<std::string>(j, "audio_path", line_no);
  r.sample_rate = field<int>(j, "sample_rate", line_no);
  r.duration = field<double>(j, "duration", line_no);
  try {
    r.provenance = provenance_from_string(field<std::string>(j, "provenance", line_no));
  } catch (const std::invalid_argument& e) {
    throw ManifestError(line_no, e.what());
  }
  r.seed = field<std::uint64_t>(j, "seed", line_no);
  r.sot_text = field<std::string>(j, "sot_text", line_no);
  if (j.contains("discarded_groups"))
    r.discarded_groups = field<std::vector<std::size_t>>(j, "discarded_groups", line_no);

  const json segs = field<json>(j, "segments", line_no);
  if (!segs.is_array()) throw ManifestError(line_no, "'segments' must be an array");
  for (const auto& sj : segs) {
    if (!sj.is_object()) throw ManifestError(line_no, "segment must be an object");
    UtteranceSegment s;
    s.speaker = SpeakerId(field<std::string>(sj, "speaker", line_no));
    s.start = field<double>(sj, "start", line_no);
    s.end = field<double>(sj, "end", line_no);
    s.text = field<std::string>(sj, "text", line_no);
    if (sj.contains("group")) s.group = field<std::size_t>(sj, "group", line_no);
    try {
      check_segment(s);
    } catch (const std::invalid_argument& e) {
      throw ManifestError(line_no, e.what());
    }
    r.segments.push_back(std::move(s));
  }
  if (r.sample_rate <= 0) throw ManifestError(line_no, "sample_rate must be positive");
  return r;
}

void atomic_write(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_manifest(const DatasetManifest& records, const fs::path& path) {
  std::string out;
  for (const auto& r : records) {
    out += manifest_line(r);
    out += '\n';
  }
  atomic_write(path, out);
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");

  DatasetManifest records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ManifestRecord r = parse_manifest_line(line, line_no);
    r.audio_missing = r.audio_path.empty() || !fs::exists(base / r.audio_path);
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace convsynth
