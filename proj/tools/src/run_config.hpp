#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace convsynth::cli {

// Bad config content or flag values; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KeySpec {
  std::string name;
  std::string default_value;
  std::string help;
};

// Keys accepted by a subcommand ("gen-transcripts", "synth", "segment", "sot", "score").
const std::vector<KeySpec>& schema_for(const std::string& command);

// Flat "key = value" settings. Values are quoted strings ("..." with \" \\ \n
// \t escapes) or bare tokens; '#' starts a comment outside quotes.
class RunConfig {
 public:
  RunConfig() = default;
  // Defaults for every key of `command`.
  explicit RunConfig(std::string command);

  const std::string& command() const { return command_; }

  // Rejects keys outside the schema.
  void set(const std::string& key, const std::string& value);
  void merge_text(const std::string& text, const std::string& source = "config");
  void merge_file(const std::string& path);

  const std::string& get(const std::string& key) const;
  std::string get_string(const std::string& key) const { return get(key); }
  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  // Every key, sorted, one per line; parses back to an equal config.
  std::string snapshot() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

 private:
  std::string command_;
  std::map<std::string, std::string> values_;
};

}  // namespace convsynth::cli
