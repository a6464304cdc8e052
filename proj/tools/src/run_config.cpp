#include "run_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace convsynth::cli {

namespace {

const std::vector<KeySpec> kCommon = {
    {"seed", "0", "master seed"},
    {"jobs", "1", "worker threads"},
    {"backend", "mock", "service backend: mock | http"},
    {"endpoint_url", "", "http backend base URL"},
    {"endpoint_token_env", "CONVSYNTH_API_TOKEN", "environment variable holding the bearer token"},
    {"max_in_flight", "4", "concurrent requests per client"},
    {"retry_attempts", "3", "attempts per request"},
};

const std::map<std::string, std::vector<KeySpec>> kCommands = {
    {"gen-transcripts",
     {
         {"pool", "", "seed transcript pool file"},
         {"pool_format", "block", "pool layout: line | block"},
         {"n", "10", "scripts to generate"},
         {"k_shots", "8", "examples per prompt"},
         {"delimiter", "\n\n", "separator after each prompt example"},
         {"instruction_header", "", "text placed before the examples"},
         {"max_speakers", "2", "reject scripts with more speakers"},
         {"adjacent_speaker", "allow", "same speaker in adjacent turns: allow | flag"},
         {"attempts_per_item", "5", "completion attempts per script"},
         {"max_tokens", "512", "completion length limit"},
         {"temperature", "0.8", "sampling temperature"},
     }},
    {"synth",
     {
         {"mode", "overlap_sim", "overlap_sim | tts_stitch | conv_tts"},
         {"n", "10", "conversations"},
         {"target_hours", "0", "when > 0, generate about this many hours instead of n"},
         {"scripts", "", "tagged transcripts, blank-line separated (tts modes)"},
         {"corpus", "", "single-speaker manifest for overlap_sim; empty uses tone speech"},
         {"mock_speakers", "8", "speakers in the tone-speech corpus"},
         {"mock_utterances", "20", "utterances per tone-speech speaker"},
         {"target_overlap", "0.2", "overlap ratio to steer toward"},
         {"pause_mean", "0.5", "mean pause, seconds"},
         {"pause_max", "2.0", "pause cap, seconds"},
         {"max_duration", "30", "conversation length cap, seconds"},
         {"max_overlap", "2.0", "cap on one overlap offset, seconds"},
         {"snr_db", "off", "white-noise SNR in dB, or off"},
         {"rir", "off", "off | default | random"},
         {"bandlimit", "false", "apply 3400 Hz telephone band-limit"},
         {"highpass", "false", "also high-pass at 300 Hz"},
         {"output_rate", "16000", "output sample rate"},
         {"mock_conv_rate", "44100", "sample rate of the mock conversational TTS"},
         {"mock_conv_overlap", "0", "turn overlap of the mock conversational TTS, seconds"},
         {"max_failure_rate", "0", "fraction of failed conversations tolerated"},
         {"change_token", "<sc>", "speaker change token for sot_text"},
     }},
    {"segment",
     {
         {"manifest", "", "input manifest"},
         {"gap_threshold", "0", "link segments closer than this, seconds"},
         {"max_span", "30", "discard groups longer than this, seconds"},
     }},
    {"sot",
     {
         {"manifest", "", "grouped manifest"},
         {"change_token", "<sc>", "speaker change token"},
         {"gap_threshold", "0", "grouping for unlabelled manifests"},
         {"max_span", "30", "grouping for unlabelled manifests"},
     }},
    {"score",
     {
         {"manifest", "", "reference manifest"},
         {"hyp", "", "hypothesis JSONL"},
         {"change_token", "<sc>", "speaker change token"},
         {"stream_policy", "alternate", "SOT chunk folding: alternate | per_chunk"},
         {"gap_threshold", "0", "grouping for unlabelled manifests"},
         {"max_span", "30", "grouping for unlabelled manifests"},
     }},
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string quote(const std::string& v) {
  std::string out = "\"";
  for (char c : v) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

// Value part of a line: quoted or bare, followed by an optional comment.
std::string parse_value(const std::string& raw, const std::string& where) {
  const std::string v = trim(raw);
  if (v.empty() || v.front() != '"') {
    const auto hash = v.find('#');
    return trim(v.substr(0, hash));
  }
  std::string out;
  std::size_t i = 1;
  for (; i < v.size() && v[i] != '"'; ++i) {
    if (v[i] != '\\') {
      out += v[i];
      continue;
    }
    if (++i >= v.size()) break;
    switch (v[i]) {
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case '"': out += '"'; break;
      case '\\': out += '\\'; break;
      default: throw ConfigError(where + ": unknown escape '\\" + std::string(1, v[i]) + "'");
    }
  }
  if (i >= v.size()) throw ConfigError(where + ": unterminated string");
  const std::string rest = trim(v.substr(i + 1));
  if (!rest.empty() && rest.front() != '#') throw ConfigError(where + ": trailing text after string");
  return out;
}

}  // namespace

const std::vector<KeySpec>& schema_for(const std::string& command) {
  static const auto merged = [] {
    std::map<std::string, std::vector<KeySpec>> m;
    for (const auto& [cmd, keys] : kCommands) {
      auto all = kCommon;
      all.insert(all.end(), keys.begin(), keys.end());
      m[cmd] = std::move(all);
    }
    return m;
  }();
  const auto it = merged.find(command);
  if (it == merged.end()) throw ConfigError("unknown command '" + command + "'");
  return it->second;
}

RunConfig::RunConfig(std::string command) : command_(std::move(command)) {
  for (const auto& k : schema_for(command_)) values_[k.name] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "command") {
    if (value != command_)
      throw ConfigError("config is for command '" + value + "', not '" + command_ + "'");
    return;
  }
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "' for " + command_);
  it->second = value;
}

void RunConfig::merge_text(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no);
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError(where + ": empty key");
    try {
      set(key, parse_value(t.substr(eq + 1), where));
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      throw ConfigError(msg.starts_with(source) ? msg : where + ": " + msg);
    }
  }
}

void RunConfig::merge_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  merge_text(ss.str(), path);
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw std::logic_error("config key '" + key + "' not in schema");
  return it->second;
}

std::int64_t RunConfig::get_int(const std::string& key) const {
  const auto& v = get(key);
  std::int64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t RunConfig::get_uint(const std::string& key) const {
  const auto& v = get(key);
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  return out;
}

double RunConfig::get_double(const std::string& key) const {
  const auto& v = get(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size() && std::isfinite(d)) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
}

bool RunConfig::get_bool(const std::string& key) const {
  std::string v = get(key);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::string RunConfig::snapshot() const {
  std::string out = "command = " + quote(command_) + "\n";
  for (const auto& [k, v] : values_) out += k + " = " + quote(v) + "\n";
  return out;
}

}  // namespace convsynth::cli
