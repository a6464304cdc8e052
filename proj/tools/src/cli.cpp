#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "convsynth/assembler.hpp"
#include "convsynth/manifest.hpp"
#include "convsynth/rng.hpp"
#include "convsynth/scorer.hpp"
#include "convsynth/segmenter.hpp"
#include "convsynth/services.hpp"
#include "convsynth/sot.hpp"
#include "convsynth/transcript_gen.hpp"
#include "convsynth/wav.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;

namespace convsynth::cli {

namespace {

struct Flags {
  std::string config;
  std::string seed;
  std::string jobs;
  std::string out;
  std::vector<std::string> sets;
  std::map<std::string, std::string> shorthand;  // key -> value
};

RunConfig resolve(const std::string& command, const Flags& f) {
  RunConfig cfg(command);
  if (!f.config.empty()) cfg.merge_file(f.config);
  if (!f.seed.empty()) cfg.set("seed", f.seed);
  if (!f.jobs.empty()) cfg.set("jobs", f.jobs);
  for (const auto& [k, v] : f.shorthand)
    if (!v.empty()) cfg.set(k, v);
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
    cfg.set(s.substr(0, eq), s.substr(eq + 1));
  }
  return cfg;
}

std::string required(const RunConfig& cfg, const std::string& key) {
  const auto& v = cfg.get(key);
  if (v.empty()) throw ConfigError("'" + key + "' is required");
  return v;
}

template <typename Fn>
auto as_config(const std::string& key, Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

std::size_t jobs_of(const RunConfig& cfg) {
  const auto j = cfg.get_int("jobs");
  if (j < 1) throw ConfigError("jobs must be >= 1");
  return static_cast<std::size_t>(j);
}

ServiceConfig service_config(const RunConfig& cfg) {
  ServiceConfig s;
  s.backend = cfg.get("backend");
  if (s.backend != "mock" && s.backend != "http") throw ConfigError("unknown backend '" + s.backend + "'");
  s.seed = cfg.get_uint("seed");
  s.endpoint.url = cfg.get("endpoint_url");
  if (s.backend == "http" && s.endpoint.url.empty()) throw ConfigError("'endpoint_url' is required for the http backend");
  const auto& env = cfg.get("endpoint_token_env");
  if (!env.empty())
    if (const char* token = std::getenv(env.c_str())) s.endpoint.token = token;
  s.endpoint.max_in_flight = static_cast<int>(cfg.get_int("max_in_flight"));
  s.endpoint.retry.max_attempts = static_cast<int>(cfg.get_int("retry_attempts"));
  if (s.endpoint.max_in_flight < 1 || s.endpoint.retry.max_attempts < 1)
    throw ConfigError("max_in_flight and retry_attempts must be >= 1");
  return s;
}

GroupingParams grouping_of(const RunConfig& cfg) {
  GroupingParams g;
  g.gap_threshold = cfg.get_double("gap_threshold");
  g.max_span = cfg.get_double("max_span");
  if (g.gap_threshold < 0.0 || g.max_span <= 0.0) throw ConfigError("gap_threshold must be >= 0 and max_span > 0");
  return g;
}

SotConfig sot_of(const RunConfig& cfg) {
  SotConfig s;
  s.change_token = cfg.get("change_token");
  as_config("change_token", [&] { check_sot_config(s); return 0; });
  return s;
}

void write_snapshot(const fs::path& out, const RunConfig& cfg) {
  atomic_write(out / "config_snapshot", cfg.snapshot());
}

std::vector<ConversationScript> load_scripts(const std::string& path) {
  const auto blocks = load_seed_pool(path, PoolFormat::block);
  std::vector<ConversationScript> out;
  for (const auto& b : blocks.examples) out.push_back(parse_script(b));
  return out;
}

CorpusPool load_corpus(const fs::path& manifest_path) {
  const auto manifest = read_manifest(manifest_path);
  const fs::path dir = manifest_path.parent_path();
  std::vector<CorpusUtterance> utts;
  for (const auto& rec : manifest) {
    if (rec.audio_missing) throw std::runtime_error("corpus audio missing: " + rec.audio_path);
    const AudioClip audio = read_wav(dir / rec.audio_path);
    for (const auto& seg : rec.segments) {
      const auto from = static_cast<std::size_t>(std::llround(seg.start * audio.sample_rate));
      const auto to = std::min(audio.size(), static_cast<std::size_t>(std::llround(seg.end * audio.sample_rate)));
      if (to <= from) continue;
      CorpusUtterance u;
      u.audio.sample_rate = audio.sample_rate;
      u.audio.samples.assign(audio.samples.begin() + static_cast<std::ptrdiff_t>(from),
                             audio.samples.begin() + static_cast<std::ptrdiff_t>(to));
      u.transcript = seg.text;
      u.speaker = seg.speaker;
      utts.push_back(std::move(u));
    }
  }
  return CorpusPool(std::move(utts));
}

int cmd_gen_transcripts(const RunConfig& cfg, const fs::path& out, std::ostream& o) {
  const std::string pool_path = required(cfg, "pool");
  const auto& fmt = cfg.get("pool_format");
  if (fmt != "line" && fmt != "block") throw ConfigError("pool_format must be line or block");
  const auto n = cfg.get_int("n");
  if (n < 0) throw ConfigError("n must be >= 0");

  PromptSpec spec;
  const auto k = cfg.get_int("k_shots");
  if (k < 1) throw ConfigError("k_shots must be >= 1");
  spec.k_shots = static_cast<std::size_t>(k);
  spec.delimiter = cfg.get("delimiter");
  spec.instruction_header = cfg.get("instruction_header");
  spec.rng_seed = derive_seed(cfg.get_uint("seed"), "gen-transcripts");

  ScriptPolicy policy;
  policy.max_speakers = static_cast<std::size_t>(cfg.get_int("max_speakers"));
  const auto& adj = cfg.get("adjacent_speaker");
  if (adj != "allow" && adj != "flag") throw ConfigError("adjacent_speaker must be allow or flag");
  policy.adjacent = adj == "flag" ? AdjacentSpeakerPolicy::flag : AdjacentSpeakerPolicy::allow;
  policy.attempts_per_item = static_cast<int>(cfg.get_int("attempts_per_item"));
  policy.max_tokens = static_cast<int>(cfg.get_int("max_tokens"));
  policy.temperature = cfg.get_double("temperature");
  policy.jobs = jobs_of(cfg);
  const auto service = make_completion_service(service_config(cfg));

  const SeedPool pool = load_seed_pool(pool_path, fmt == "line" ? PoolFormat::line : PoolFormat::block);
  GenerationResult result;
  if (n > 0) result = generate_scripts(pool, spec, static_cast<std::size_t>(n), policy, *service);

  std::string text;
  for (const auto& s : result.scripts) text += (text.empty() ? "" : "\n") + render_script(s) + "\n";
  fs::create_directories(out);
  atomic_write(out / "scripts.txt", text);
  write_snapshot(out, cfg);

  o << "scripts " << result.scripts.size() << " shortfall " << result.shortfall << "\n";
  for (const auto& [reason, count] : result.rejections) o << "rejected " << reason << ": " << count << "\n";
  return result.shortfall > 0 ? kExitFailure : kExitOk;
}

int cmd_synth(const RunConfig& cfg, const fs::path& out, std::ostream& o, std::ostream& e) {
  DatasetSpec spec;
  spec.mode = as_config("mode", [&] { return synth_mode_from_string(cfg.get("mode")); });
  spec.master_seed = cfg.get_uint("seed");
  spec.jobs = jobs_of(cfg);
  const auto n = cfg.get_int("n");
  if (n < 0) throw ConfigError("n must be >= 0");
  spec.n_conversations = static_cast<std::size_t>(n);
  if (const double h = cfg.get_double("target_hours"); h > 0.0) spec.target_hours = h;

  SessionParams& p = spec.session;
  p.target_overlap_ratio = cfg.get_double("target_overlap");
  p.pause_mean = cfg.get_double("pause_mean");
  p.pause_max = cfg.get_double("pause_max");
  p.max_duration = cfg.get_double("max_duration");
  p.max_overlap = cfg.get_double("max_overlap");
  if (const auto& snr = cfg.get("snr_db"); snr != "off") p.snr_db = cfg.get_double("snr_db");
  const auto& rir = cfg.get("rir");
  if (rir == "default") {
    p.rir = dsp::RoomSpec{};
  } else if (rir == "random") {
    p.random_rir = true;
  } else if (rir != "off") {
    throw ConfigError("rir must be off, default or random");
  }
  p.bandlimit = cfg.get_bool("bandlimit");
  p.highpass = cfg.get_bool("highpass");
  p.output_rate = static_cast<int>(cfg.get_int("output_rate"));
  as_config("session", [&] { check_session(p); return 0; });
  spec.sot = sot_of(cfg);
  const double max_failure_rate = cfg.get_double("max_failure_rate");

  ServiceConfig sc = service_config(cfg);
  sc.mock_conv_rate = static_cast<int>(cfg.get_int("mock_conv_rate"));
  sc.mock_conv_overlap = cfg.get_double("mock_conv_overlap");

  std::optional<CorpusPool> pool;
  std::unique_ptr<UtteranceTtsService> tts;
  std::unique_ptr<ConversationTtsService> conv;
  switch (spec.mode) {
    case SynthMode::overlap_sim: {
      const auto& corpus = cfg.get("corpus");
      if (corpus.empty()) {
        const auto speakers = cfg.get_int("mock_speakers"), per = cfg.get_int("mock_utterances");
        if (speakers < 2 || per < 1) throw ConfigError("mock_speakers must be >= 2 and mock_utterances >= 1");
        pool = make_mock_corpus(static_cast<std::size_t>(speakers), static_cast<std::size_t>(per),
                                derive_seed(spec.master_seed, "corpus"), p.output_rate);
      } else {
        pool = load_corpus(corpus);
      }
      spec.pool = &*pool;
      break;
    }
    case SynthMode::tts_stitch:
      spec.scripts = load_scripts(required(cfg, "scripts"));
      tts = make_tts_service(sc);
      spec.tts = tts.get();
      break;
    case SynthMode::conv_tts:
      spec.scripts = load_scripts(required(cfg, "scripts"));
      conv = make_conv_tts_service(sc);
      spec.conv_tts = conv.get();
      break;
  }
  spec.config_snapshot = cfg.snapshot();

  const BuildResult r = build_dataset(spec, out);
  double hours = 0.0;
  for (const auto& rec : r.manifest) hours += rec.duration / 3600.0;
  o << "conversations " << r.manifest.size() << " failed " << r.failures.size() << " hours " << hours << "\n";
  for (const auto& f : r.failures) e << "failed " << f.id << ": " << f.error << "\n";
  const double rate = r.attempted ? static_cast<double>(r.failures.size()) / static_cast<double>(r.attempted) : 0.0;
  return rate > max_failure_rate ? kExitFailure : kExitOk;
}

int cmd_segment(const RunConfig& cfg, const fs::path& out, std::ostream& o) {
  const fs::path in = required(cfg, "manifest");
  const GroupingParams g = grouping_of(cfg);
  DatasetManifest manifest = read_manifest(in);
  const GroupingStats stats = attach_groups(manifest, g);

  fs::create_directories(out);
  const fs::path src_dir = fs::weakly_canonical(fs::absolute(in).parent_path());
  const fs::path dst_dir = fs::weakly_canonical(fs::absolute(out));
  for (auto& rec : manifest)
    rec.audio_path = (src_dir / rec.audio_path).lexically_normal().lexically_relative(dst_dir).generic_string();
  write_manifest(manifest, out / "manifest.jsonl");
  write_snapshot(out, cfg);
  o << "groups " << stats.groups << " discarded " << stats.discarded << "\n";
  return kExitOk;
}

int cmd_sot(const RunConfig& cfg, const fs::path& out, std::ostream& o) {
  const fs::path in = required(cfg, "manifest");
  const SotConfig sot = sot_of(cfg);
  const auto groups = reference_groups(read_manifest(in), grouping_of(cfg));
  std::string text;
  std::size_t changes = 0;
  for (const auto& g : groups) {
    UtteranceGroup norm = g.group;
    for (auto& s : norm.segments) s.text = normalize_text(s.text);
    changes += speaker_changes(norm);
    nlohmann::ordered_json j;
    j["group_id"] = g.group_id;
    j["sot_text"] = serialize_group(norm, sot);
    text += j.dump() + "\n";
  }
  fs::create_directories(out);
  atomic_write(out / "sot.jsonl", text);
  write_snapshot(out, cfg);
  o << "groups " << groups.size() << " change_tokens " << changes << "\n";
  return kExitOk;
}

int cmd_score(const RunConfig& cfg, const fs::path& out, std::ostream& o, std::ostream& e) {
  ScoreConfig sc;
  sc.sot = sot_of(cfg);
  sc.stream_policy = as_config("stream_policy", [&] { return stream_policy_from_string(cfg.get("stream_policy")); });
  sc.grouping = grouping_of(cfg);
  sc.jobs = jobs_of(cfg);
  const auto manifest = read_manifest(required(cfg, "manifest"));
  const auto hyps = read_hypotheses(required(cfg, "hyp"));
  const CorpusReport report = score_corpus(manifest, hyps, sc);

  fs::create_directories(out);
  atomic_write(out / "report.json", report.to_json());
  write_snapshot(out, cfg);
  if (!report.missing.empty()) e << "missing hypotheses for " << report.missing.size() << " groups\n";
  o << format_cpwer(report.cpwer()) << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthetic multi-speaker conversation data toolkit", "convsynth"};
  app.require_subcommand(1);

  struct Sub {
    std::string name;
    std::string help;
    std::vector<std::pair<std::string, std::string>> shorthands;  // flag, key
  };
  const std::vector<Sub> subs = {
      {"gen-transcripts", "generate tagged two-speaker transcripts", {{"-n", "n"}, {"--pool", "pool"}}},
      {"synth", "assemble conversation audio and a manifest",
       {{"-n", "n"}, {"--mode", "mode"}, {"--scripts", "scripts"}}},
      {"segment", "group overlapping utterances", {{"--manifest", "manifest"}}},
      {"sot", "serialize groups with speaker-change tokens", {{"--manifest", "manifest"}}},
      {"score", "cpWER of hypotheses against a manifest", {{"--manifest", "manifest"}, {"--hyp", "hyp"}}},
  };

  std::map<std::string, Flags> flags;
  std::map<std::string, CLI::App*> apps;
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    auto& f = flags[s.name];
    sub->add_option("--config", f.config, "key = value config file");
    sub->add_option("--seed", f.seed, "master seed");
    sub->add_option("--jobs", f.jobs, "worker threads");
    sub->add_option("--out", f.out, "output directory")->required();
    sub->add_option("--set", f.sets, "override a config key (key=value)");
    for (const auto& [flag, key] : s.shorthands) sub->add_option(flag, f.shorthand[key], "sets '" + key + "'");
    apps[s.name] = sub;
  }

  std::vector<const char*> argv{"convsynth"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  std::string command;
  for (const auto& [name, sub] : apps)
    if (sub->parsed()) command = name;
  const Flags& f = flags[command];
  const fs::path out_dir = f.out;
  try {
    const RunConfig cfg = resolve(command, f);
    if (command == "gen-transcripts") return cmd_gen_transcripts(cfg, out_dir, out);
    if (command == "synth") return cmd_synth(cfg, out_dir, out, err);
    if (command == "segment") return cmd_segment(cfg, out_dir, out);
    if (command == "sot") return cmd_sot(cfg, out_dir, out);
    return cmd_score(cfg, out_dir, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace convsynth::cli
