#include "convsynth/scorer.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "convsynth/manifest.hpp"
#include "convsynth/parallel.hpp"

namespace convsynth {

Words split_words(std::string_view text) {
  Words out;
  std::istringstream in{std::string(text)};
  for (std::string w; in >> w;) out.push_back(std::move(w));
  return out;
}

std::optional<double> ErrorCounts::rate() const {
  if (ref_words > 0) return static_cast<double>(errors()) / static_cast<double>(ref_words);
  if (errors() == 0) return 0.0;
  return std::nullopt;
}

ErrorCounts word_edit_distance(const Words& ref, const Words& hyp) {
  struct Cell {
    std::size_t dist = 0, indel = 0, s = 0, i = 0, d = 0;
    bool better_than(const Cell& o) const {
      return dist != o.dist ? dist < o.dist : indel < o.indel;
    }
  };
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<Cell> prev(m + 1), cur(m + 1);
  for (std::size_t j = 1; j <= m; ++j) prev[j] = {j, j, 0, j, 0};
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = {i, i, 0, 0, i};
    for (std::size_t j = 1; j <= m; ++j) {
      Cell best = prev[j - 1];
      if (ref[i - 1] != hyp[j - 1]) {
        ++best.dist;
        ++best.s;
      }
      Cell del = prev[j];
      ++del.dist;
      ++del.indel;
      ++del.d;
      if (del.better_than(best)) best = del;
      Cell ins = cur[j - 1];
      ++ins.dist;
      ++ins.indel;
      ++ins.i;
      if (ins.better_than(best)) best = ins;
      cur[j] = best;
    }
    std::swap(prev, cur);
  }
  const Cell& c = prev[m];
  return {c.s, c.i, c.d, n};
}

std::vector<std::size_t> solve_assignment(const std::vector<std::vector<std::int64_t>>& cost) {
  const std::size_t n = cost.size();
  for (const auto& row : cost)
    if (row.size() != n) throw std::invalid_argument("assignment cost matrix must be square");
  if (n == 0) return {};

  // Potentials method, 1-based with a virtual column 0.
  constexpr std::int64_t inf = std::numeric_limits<std::int64_t>::max() / 4;
  std::vector<std::int64_t> u(n + 1, 0), v(n + 1, 0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<std::int64_t> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      std::int64_t delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const std::int64_t c = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (c < minv[j]) {
          minv[j] = c;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

GroupScore cp_wer(const std::vector<NamedStream>& refs, const std::vector<NamedStream>& hyps) {
  GroupScore out;
  const std::size_t n = std::max(refs.size(), hyps.size());
  if (n == 0) return out;

  static const Words empty;
  auto ref_at = [&](std::size_t i) -> const Words& { return i < refs.size() ? refs[i].words : empty; };
  auto hyp_at = [&](std::size_t j) -> const Words& { return j < hyps.size() ? hyps[j].words : empty; };

  std::size_t total_words = 0;
  for (const auto& r : refs) total_words += r.words.size();
  for (const auto& h : hyps) total_words += h.words.size();
  const auto weight = static_cast<std::int64_t>(total_words) + 1;

  std::vector<std::vector<ErrorCounts>> pair(n, std::vector<ErrorCounts>(n));
  std::vector<std::vector<std::int64_t>> cost(n, std::vector<std::int64_t>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      pair[i][j] = word_edit_distance(ref_at(i), hyp_at(j));
      const auto& c = pair[i][j];
      cost[i][j] = static_cast<std::int64_t>(c.errors()) * weight +
                   static_cast<std::int64_t>(c.insertions + c.deletions);
    }
  }
  out.permutation = solve_assignment(cost);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = out.permutation[i];
    out.counts += pair[i][j];
    out.assignment.emplace_back(i < refs.size() ? refs[i].label : "", j < hyps.size() ? hyps[j].label : "");
  }
  return out;
}

SotStreamPolicy stream_policy_from_string(const std::string& s) {
  if (s == "alternate") return SotStreamPolicy::alternate;
  if (s == "per_chunk") return SotStreamPolicy::per_chunk;
  throw std::invalid_argument("unknown stream policy '" + s + "'");
}

std::string to_string(SotStreamPolicy p) {
  return p == SotStreamPolicy::alternate ? "alternate" : "per_chunk";
}

std::map<std::string, Hypothesis> parse_hypotheses(const std::string& jsonl) {
  std::map<std::string, Hypothesis> out;
  std::istringstream in(jsonl);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "hypothesis line " + std::to_string(line_no) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ScoreError(where + "invalid JSON (" + e.what() + ")");
    }
    if (!j.is_object() || !j.contains("group_id") || !j["group_id"].is_string())
      throw ScoreError(where + "missing string group_id");
    Hypothesis h;
    h.group_id = j["group_id"].get<std::string>();
    const bool has_sot = j.contains("sot_text"), has_streams = j.contains("streams");
    if (has_sot == has_streams) throw ScoreError(where + "need exactly one of sot_text or streams");
    if (has_sot) {
      if (!j["sot_text"].is_string()) throw ScoreError(where + "sot_text must be a string");
      h.sot_text = j["sot_text"].get<std::string>();
    } else {
      if (!j["streams"].is_array()) throw ScoreError(where + "streams must be an array");
      for (const auto& s : j["streams"]) {
        if (!s.is_string()) throw ScoreError(where + "streams must hold strings");
        h.streams.push_back(s.get<std::string>());
      }
    }
    if (out.contains(h.group_id)) throw ScoreError(where + "duplicate group_id '" + h.group_id + "'");
    out.emplace(h.group_id, std::move(h));
  }
  return out;
}

std::map<std::string, Hypothesis> read_hypotheses(const std::filesystem::path& path) {
  return parse_hypotheses(read_file(path));
}

std::vector<ReferenceGroup> reference_groups(const DatasetManifest& manifest, const GroupingParams& grouping) {
  std::vector<ReferenceGroup> out;
  for (const auto& original : manifest) {
    ManifestRecord record = original;
    const bool labelled = !record.segments.empty() &&
                          std::all_of(record.segments.begin(), record.segments.end(),
                                      [](const UtteranceSegment& s) { return s.group.has_value(); });
    if (!labelled) {
      DatasetManifest one{record};
      attach_groups(one, grouping);
      record = std::move(one.front());
    }
    std::map<std::size_t, std::vector<UtteranceSegment>> by_group;
    for (const auto& s : record.segments) by_group[*s.group].push_back(s);
    const std::set<std::size_t> dropped(record.discarded_groups.begin(), record.discarded_groups.end());
    for (auto& [index, segs] : by_group) {
      if (dropped.contains(index)) continue;
      out.push_back({group_key(record.id, index), make_group(std::move(segs))});
    }
  }
  return out;
}

std::vector<NamedStream> reference_streams(const UtteranceGroup& group, const Normalizer& normalize) {
  std::vector<UtteranceSegment> segs = group.segments;
  std::sort(segs.begin(), segs.end(), segment_less);
  std::vector<NamedStream> out;
  for (const auto& s : segs) {
    auto it = std::find_if(out.begin(), out.end(), [&](const NamedStream& n) { return n.label == s.speaker.label; });
    if (it == out.end()) {
      out.push_back({s.speaker.label, {}});
      it = std::prev(out.end());
    }
    for (auto& w : split_words(normalize(s.text))) it->words.push_back(std::move(w));
  }
  return out;
}

std::vector<NamedStream> hypothesis_streams(const Hypothesis& hyp, std::size_t ref_speakers, const ScoreConfig& cfg) {
  std::vector<NamedStream> out;
  if (!hyp.sot_text) {
    for (std::size_t k = 0; k < hyp.streams.size(); ++k)
      out.push_back({std::to_string(k), split_words(cfg.normalizer(hyp.streams[k]))});
    return out;
  }
  const auto parsed = deserialize_sot(*hyp.sot_text, cfg.sot);
  if (cfg.stream_policy == SotStreamPolicy::per_chunk) {
    for (const auto& c : parsed.chunks)
      out.push_back({std::to_string(c.channel), split_words(cfg.normalizer(c.text))});
    return out;
  }
  const std::size_t r = std::max<std::size_t>(ref_speakers, 1);
  for (const auto& c : parsed.chunks) {
    const std::size_t k = c.channel % r;
    while (out.size() <= k) out.push_back({std::to_string(out.size()), {}});
    for (auto& w : split_words(cfg.normalizer(c.text))) out[k].words.push_back(std::move(w));
  }
  return out;
}

CorpusReport score_corpus(const DatasetManifest& reference, const std::map<std::string, Hypothesis>& hypotheses,
                          const ScoreConfig& cfg) {
  const auto groups = reference_groups(reference, cfg.grouping);
  std::set<std::string> known;
  for (const auto& g : groups) known.insert(g.group_id);
  for (const auto& [id, h] : hypotheses)
    if (!known.contains(id)) throw ScoreError("hypothesis for unknown group '" + id + "'");

  CorpusReport report;
  report.groups.resize(groups.size());
  parallel_for(groups.size(), cfg.jobs, [&](std::size_t i) {
    const auto refs = reference_streams(groups[i].group, cfg.normalizer);
    const auto it = hypotheses.find(groups[i].group_id);
    GroupScore score = it == hypotheses.end() ? cp_wer(refs, {})
                                              : cp_wer(refs, hypothesis_streams(it->second, refs.size(), cfg));
    score.group_id = groups[i].group_id;
    score.missing_hypothesis = it == hypotheses.end();
    report.groups[i] = std::move(score);
  });
  for (const auto& g : report.groups) {
    report.total += g.counts;
    if (g.missing_hypothesis) report.missing.push_back(g.group_id);
  }
  return report;
}

namespace {

nlohmann::ordered_json counts_json(const ErrorCounts& c) {
  nlohmann::ordered_json j;
  j["substitutions"] = c.substitutions;
  j["insertions"] = c.insertions;
  j["deletions"] = c.deletions;
  j["errors"] = c.errors();
  j["ref_words"] = c.ref_words;
  const auto r = c.rate();
  j["cpwer"] = r ? nlohmann::ordered_json(*r) : nlohmann::ordered_json(nullptr);
  return j;
}

}  // namespace

std::string CorpusReport::to_json() const {
  nlohmann::ordered_json j;
  j["corpus"] = counts_json(total);
  j["corpus"]["groups"] = groups.size();
  j["corpus"]["missing_hypotheses"] = missing;
  auto& arr = j["groups"] = nlohmann::ordered_json::array();
  for (const auto& g : groups) {
    nlohmann::ordered_json e;
    e["group_id"] = g.group_id;
    e["missing_hypothesis"] = g.missing_hypothesis;
    auto& a = e["assignment"] = nlohmann::ordered_json::array();
    for (const auto& [ref, hyp] : g.assignment) a.push_back({{"ref", ref}, {"hyp", hyp}});
    const auto counts = counts_json(g.counts);
    for (const auto& [k, v] : counts.items()) e[k] = v;
    arr.push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

std::string format_cpwer(std::optional<double> rate) {
  if (!rate) return "cpWER n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "cpWER %.2f%%", *rate * 100.0);
  return buf;
}

}  // namespace convsynth
