#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "convsynth/segmenter.hpp"
#include "convsynth/sot.hpp"
#include "convsynth/types.hpp"

namespace convsynth {

class ScoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Words = std::vector<std::string>;

Words split_words(std::string_view text);

struct ErrorCounts {
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t ref_words = 0;

  std::size_t errors() const { return substitutions + insertions + deletions; }
  // errors / ref_words; 0 for an empty reference matched by an empty
  // hypothesis, undefined for insertions against an empty reference.
  std::optional<double> rate() const;

  ErrorCounts& operator+=(const ErrorCounts& o) {
    substitutions += o.substitutions;
    insertions += o.insertions;
    deletions += o.deletions;
    ref_words += o.ref_words;
    return *this;
  }
  friend ErrorCounts operator+(ErrorCounts a, const ErrorCounts& b) { return a += b; }
  friend bool operator==(const ErrorCounts&, const ErrorCounts&) = default;
};

// Levenshtein alignment with unit costs. Among minimal alignments the one
// with the fewest insertions+deletions is taken, so S, I and D are unique.
ErrorCounts word_edit_distance(const Words& ref, const Words& hyp);

// Minimum-cost perfect matching on a square matrix (Hungarian method).
// Returns the column assigned to each row.
std::vector<std::size_t> solve_assignment(const std::vector<std::vector<std::int64_t>>& cost);

struct NamedStream {
  std::string label;
  Words words;
};

struct GroupScore {
  std::string group_id;
  // (reference speaker, hypothesis stream); "" marks an empty padding stream.
  std::vector<std::pair<std::string, std::string>> assignment;
  // permutation[i] = hypothesis index matched to reference i after padding.
  std::vector<std::size_t> permutation;
  ErrorCounts counts;
  bool missing_hypothesis = false;
};

// Pads the smaller side with empty streams and picks the assignment with the
// fewest total errors (ties: fewest insertions+deletions).
GroupScore cp_wer(const std::vector<NamedStream>& refs, const std::vector<NamedStream>& hyps);

// How SOT chunks become hypothesis streams. `alternate` folds chunk k onto
// stream k mod R (R = reference speaker count), `per_chunk` makes every chunk
// its own stream.
enum class SotStreamPolicy { alternate, per_chunk };

SotStreamPolicy stream_policy_from_string(const std::string& s);
std::string to_string(SotStreamPolicy p);

struct Hypothesis {
  std::string group_id;
  std::optional<std::string> sot_text;
  std::vector<std::string> streams;
};

// JSONL of {"group_id", "sot_text"} or {"group_id", "streams": [..]}.
// Duplicate ids and malformed lines throw ScoreError.
std::map<std::string, Hypothesis> parse_hypotheses(const std::string& jsonl);
std::map<std::string, Hypothesis> read_hypotheses(const std::filesystem::path& path);

struct ReferenceGroup {
  std::string group_id;
  UtteranceGroup group;
};

// Kept groups of every record, keyed by group_key(record id, index). Records
// already labelled by attach_groups keep their labels; others are grouped here.
std::vector<ReferenceGroup> reference_groups(const DatasetManifest& manifest,
                                             const GroupingParams& grouping = {});

struct ScoreConfig {
  SotConfig sot;
  SotStreamPolicy stream_policy = SotStreamPolicy::alternate;
  GroupingParams grouping;
  Normalizer normalizer = normalize_text;
  std::size_t jobs = 1;
};

// Per-speaker reference streams in first-appearance order, each the
// speaker's utterances concatenated in start order and normalized.
std::vector<NamedStream> reference_streams(const UtteranceGroup& group, const Normalizer& normalize);

std::vector<NamedStream> hypothesis_streams(const Hypothesis& hyp, std::size_t ref_speakers,
                                            const ScoreConfig& cfg);

struct CorpusReport {
  std::vector<GroupScore> groups;
  ErrorCounts total;
  std::vector<std::string> missing;  // group ids without a hypothesis

  std::optional<double> cpwer() const { return total.rate(); }
  std::string to_json() const;
};

CorpusReport score_corpus(const DatasetManifest& reference,
                          const std::map<std::string, Hypothesis>& hypotheses,
                          const ScoreConfig& cfg = {});

// "cpWER 12.34%" ("cpWER n/a" when undefined).
std::string format_cpwer(std::optional<double> rate);

}  // namespace convsynth
