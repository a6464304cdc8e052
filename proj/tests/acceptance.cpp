// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 on success).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "convsynth/assembler.hpp"
#include "convsynth/dsp.hpp"
#include "convsynth/manifest.hpp"
#include "convsynth/rng.hpp"
#include "convsynth/scorer.hpp"
#include "convsynth/segmenter.hpp"
#include "convsynth/services.hpp"
#include "convsynth/transcript_gen.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace convsynth;

namespace {

// Pinned limits.
constexpr double kOracleSeconds = 10.0;
constexpr double kRirSeconds = 30.0;
constexpr double kPipelineSeconds = 60.0;
constexpr double kStopbandDb = 40.0;
constexpr double kPassbandDb = 1.0;
constexpr double kResampleDb = 0.5;
constexpr double kConvTolerance = 1e-6;
constexpr double kRt60Tolerance = 0.25;
constexpr double kOverlapLo = 0.15, kOverlapHi = 0.25;
constexpr double kMaxSpan = 30.0;

struct Outcome {
  bool pass = true;
  std::string detail;
  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

const std::vector<std::string> kVocab{"a", "b", "c", "d", "e"};

Words random_words(Rng& rng, std::size_t max_len, std::size_t vocab) {
  Words w(rng.index(max_len + 1));
  for (auto& x : w) x = kVocab[rng.index(vocab)];
  return w;
}

bool same(const ErrorCounts& c, const oracle::Counts& o) {
  return c.substitutions == o.s && c.insertions == o.i && c.deletions == o.d;
}

std::vector<NamedStream> named(const std::vector<Words>& ws, const std::string& prefix) {
  std::vector<NamedStream> out;
  for (std::size_t i = 0; i < ws.size(); ++i) out.push_back({prefix + std::to_string(i), ws[i]});
  return out;
}

Outcome cpwer_oracle() {
  Outcome o;
  Rng rng(101);
  const auto t0 = std::chrono::steady_clock::now();
  for (int k = 0; k < 500; ++k) {
    const std::size_t nr = 1 + rng.index(4), nh = 1 + rng.index(4);
    std::vector<Words> refs(nr), hyps(nh);
    for (auto& r : refs) r = random_words(rng, 12, 4);
    for (auto& h : hyps) h = random_words(rng, 12, 4);
    const auto got = cp_wer(named(refs, "r"), named(hyps, "h"));
    if (!same(got.counts, oracle::brute_force_cpwer(refs, hyps))) o.fail("mismatch at case " + std::to_string(k));
  }
  const double t = seconds_since(t0);
  if (t >= kOracleSeconds) o.fail(fmt("runtime %.2f s", t));
  if (o.pass) o.detail = fmt("500 groups, %.2f s", t);
  return o;
}

Outcome cpwer_invariance() {
  Outcome o;
  Rng rng(202);
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = 1 + rng.index(4);
    std::vector<Words> refs(n), hyps(n);
    for (auto& r : refs) r = random_words(rng, 10, 4);
    for (auto& h : hyps) h = random_words(rng, 10, 4);
    const auto base = cp_wer(named(refs, "r"), named(hyps, "h")).counts;
    auto perm = hyps;
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
    auto relabeled = named(perm, "x");
    std::reverse(relabeled.begin(), relabeled.end());
    if (!(cp_wer(named(refs, "r"), relabeled).counts == base)) o.fail("permutation changed counts");

    const auto single = cp_wer(named({refs[0]}, "r"), named({hyps[0]}, "h")).counts;
    if (!(single == word_edit_distance(refs[0], hyps[0]))) o.fail("single speaker differs from WER");
  }
  if (o.pass) o.detail = "1000 cases";
  return o;
}

Outcome corpus_accumulation() {
  Outcome o;
  Rng rng(303);
  DatasetManifest manifest;
  std::map<std::string, Hypothesis> hyps;
  const std::vector<std::string> words{"alpha", "beta", "gamma", "delta"};
  auto sentence = [&](std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + words[rng.index(words.size())];
    return s;
  };
  for (int g = 0; g < 20; ++g) {
    ManifestRecord r;
    r.id = "rec" + std::to_string(g);
    r.audio_path = r.id + ".wav";
    r.segments = {{SpeakerId("A"), 0.0, 2.0, sentence(1 + rng.index(6)), {}},
                  {SpeakerId("B"), 1.0, 3.0, sentence(1 + rng.index(6)), {}}};
    manifest.push_back(r);
    Hypothesis h;
    h.group_id = group_key(r.id, 0);
    h.streams = {sentence(rng.index(7)), sentence(rng.index(7))};
    hyps[h.group_id] = h;
  }
  const auto report = score_corpus(manifest, hyps);
  const auto j = nlohmann::json::parse(report.to_json());
  long errors = 0, ref_words = 0;
  for (const auto& g : j["groups"]) {
    errors += g["errors"].get<long>();
    ref_words += g["ref_words"].get<long>();
  }
  if (j["groups"].size() != 20) o.fail("expected 20 groups");
  if (ref_words == 0 || !report.cpwer()) {
    o.fail("no reference words");
    return o;
  }
  const double by_hand = static_cast<double>(errors) / static_cast<double>(ref_words);
  if (*report.cpwer() != by_hand) o.fail(fmt("corpus %.17g vs hand %.17g", *report.cpwer(), by_hand));
  if (j["corpus"]["cpwer"].get<double>() != by_hand) o.fail("json corpus rate differs");
  if (o.pass) o.detail = fmt("%.0f errors / %.0f words", errors, ref_words);
  return o;
}

Outcome edit_distance() {
  Outcome o;
  std::size_t cases = 0;
  // Every pair of sequences of length <= 4 exhaustively, then random pairs up to 6.
  std::vector<Words> all{{}};
  for (std::size_t len = 1; len <= 4; ++len) {
    std::vector<Words> next;
    for (const auto& w : all)
      if (w.size() == len - 1)
        for (std::size_t v = 0; v < 3; ++v) {
          auto x = w;
          x.push_back(kVocab[v]);
          next.push_back(x);
        }
    all.insert(all.end(), next.begin(), next.end());
  }
  for (const auto& r : all)
    for (const auto& h : all) {
      ++cases;
      if (!same(word_edit_distance(r, h), oracle::exhaustive_alignment(r, h))) o.fail("mismatch");
    }
  Rng rng(404);
  for (int k = 0; k < 3000; ++k, ++cases) {
    const auto r = random_words(rng, 6, 3), h = random_words(rng, 6, 3);
    if (!same(word_edit_distance(r, h), oracle::exhaustive_alignment(r, h))) o.fail("mismatch");
  }
  if (o.pass) o.detail = std::to_string(cases) + " pairs";
  return o;
}

double db(double ratio) { return 20.0 * std::log10(ratio); }

Outcome dsp_checks() {
  Outcome o;
  constexpr int rate = 16000;
  const std::size_t n = rate;
  auto tone_db = [&](double f) {
    AudioClip c{oracle::sine(f, rate, n, 0.5), rate};
    const auto y = dsp::telephone_bandlimit(c);
    return db(oracle::dtft_magnitude(y.samples, f, rate) / oracle::dtft_magnitude(c.samples, f, rate));
  };
  const double stop = tone_db(5000), pass = tone_db(1000);
  if (-stop < kStopbandDb) o.fail(fmt("5 kHz only %.1f dB down", -stop));
  if (std::abs(pass) > kPassbandDb) o.fail(fmt("1 kHz off by %.2f dB", pass));

  AudioClip src{oracle::sine(440, 44100, 44100, 0.5), 44100};
  const auto out = dsp::resample(src, 16000);
  double best_f = 0, best = -1;
  for (double f = 400; f <= 480; f += 1.0) {
    const double m = oracle::dtft_magnitude(out.samples, f, 16000);
    if (m > best) best = m, best_f = f;
  }
  const double amp_db = db(best / 0.5);
  if (best_f != 440) o.fail(fmt("peak moved to %.0f Hz", best_f));
  if (std::abs(amp_db) > kResampleDb) o.fail(fmt("440 Hz amplitude off by %.2f dB", amp_db));

  Rng rng(505);
  double worst = 0;
  for (int k = 0; k < 5; ++k) {
    std::vector<double> a(3000 + rng.index(2000)), b(200 + rng.index(800));
    for (auto& x : a) x = rng.uniform(-1, 1);
    for (auto& x : b) x = rng.uniform(-1, 1);
    const auto fft = dsp::convolve_raw(a, b, dsp::ConvolutionMethod::fft);
    const auto ref = oracle::direct_convolution(a, b);
    if (fft.size() != ref.size()) {
      o.fail("length mismatch");
      continue;
    }
    for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(fft[i] - ref[i]));
  }
  if (worst > kConvTolerance) o.fail(fmt("FFT deviates by %.3g", worst));
  if (o.pass)
    o.detail = fmt("5k %.1f dB, 1k %.3f dB, ", stop, pass) + fmt("440 %+.3f dB, conv err %.2g", amp_db, worst);
  return o;
}

Outcome rir_checks() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  dsp::RoomSpec anechoic;
  anechoic.absorption = 1.0;
  anechoic.source = {1.0, 2.0, 1.5};
  anechoic.mic = {4.43, 2.0, 1.5};
  const auto h = dsp::generate_rir(anechoic, 16000);
  const auto expect = static_cast<std::size_t>(std::llround(3.43 / 343.0 * 16000));
  std::vector<std::size_t> nz;
  for (std::size_t i = 0; i < h.size(); ++i)
    if (h.samples[i] != 0.0) nz.push_back(i);
  if (nz.size() != 1 || nz[0] != expect) o.fail("anechoic response is not a single impulse at the direct path");

  Rng rng(606);
  double worst = 0;
  for (int k = 0; k < 10; ++k) {
    const auto room = dsp::random_room(rng, 40);
    const double sabine = dsp::sabine_rt60(room);
    const double est = dsp::schroeder_rt60(dsp::generate_rir(room, 16000));
    const double rel = std::abs(est / sabine - 1.0);
    worst = std::max(worst, rel);
    if (rel > kRt60Tolerance)
      o.fail(fmt("room %.0f: schroeder %.3f s vs sabine %.3f s", k, est, sabine));
  }
  const double t = seconds_since(t0);
  if (t >= kRirSeconds) o.fail(fmt("runtime %.1f s", t));
  o.detail += (o.detail.empty() ? "" : "; ") + fmt("worst RT60 deviation %.1f%%, %.1f s", 100 * worst, t);
  return o;
}

bool same_speaker_overlap(const std::vector<UtteranceSegment>& segs) {
  for (std::size_t a = 0; a < segs.size(); ++a)
    for (std::size_t b = a + 1; b < segs.size(); ++b)
      if (segs[a].speaker == segs[b].speaker && segs[a].start < segs[b].end && segs[b].start < segs[a].end)
        return true;
  return false;
}

Outcome assembly_contracts() {
  Outcome o;
  const auto pool = make_mock_corpus(8, 40, 707);
  double sum = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SessionParams p;
    p.target_overlap_ratio = 0.2;
    p.rng_seed = derive_seed(707, "session", seed);
    const auto s = simulate_overlap(pool, p);
    sum += overlap_ratio(s.segments);
    double lo = 1e9, hi = 0;
    for (const auto& seg : s.segments) lo = std::min(lo, seg.start), hi = std::max(hi, seg.end);
    if (hi - lo > kMaxSpan || s.audio.duration() > kMaxSpan) o.fail("session longer than 30 s");
  }
  const double mean = sum / 100;
  if (mean < kOverlapLo || mean > kOverlapHi) o.fail(fmt("mean overlap %.3f", mean));

  MockTtsService tts;
  const auto voices = tts.voices();
  Rng rng(708);
  std::size_t stitched = 0;
  for (int k = 0; k < 100; ++k) {
    std::vector<std::pair<SpeakerId, std::string>> turns;
    const std::size_t speakers = 2 + rng.index(2);
    for (std::size_t t = 0, n = 3 + rng.index(8); t < n; ++t) {
      std::string text;
      for (std::size_t w = 0, nw = 1 + rng.index(5); w < nw; ++w) text += (w ? " w" : "w") + std::to_string(w);
      turns.emplace_back(SpeakerId("S" + std::to_string(1 + rng.index(speakers))), text);
    }
    ConversationScript script(turns);
    std::map<SpeakerId, std::string> vmap;
    for (std::size_t i = 0; i < script.speakers().size(); ++i) vmap[script.speakers()[i]] = voices[i];
    SessionParams p;
    p.target_overlap_ratio = 0.5;
    p.rng_seed = 9000 + k;
    try {
      const auto s = stitch_tts(script, vmap, tts, p);
      ++stitched;
      if (same_speaker_overlap(s.segments)) o.fail("same-speaker overlap in stitched session " + std::to_string(k));
    } catch (const std::exception& e) {
      o.fail(std::string("stitch failed: ") + e.what());
    }
  }
  if (o.pass) o.detail = fmt("mean overlap %.3f, %.0f stitched sessions clean", mean, stitched);
  return o;
}

struct CliRun {
  int code;
  std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

Outcome end_to_end() {
  Outcome o;
  TempDir dir;
  std::vector<std::string> manifests, reports, wavs;
  std::string score_line;
  double worst_t = 0;
  for (int run = 0; run < 2; ++run) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto base = dir.path / ("run" + std::to_string(run));
    const auto s = (base / "scripts").string(), d = (base / "data").string(), g = (base / "groups").string(),
               t = (base / "sot").string(), r = (base / "score").string();
    const std::vector<std::vector<std::string>> steps{
        {"gen-transcripts", "--pool", CONVSYNTH_SEED_POOL, "-n", "20", "--seed", "42", "--out", s},
        {"synth", "--mode", "conv_tts", "--scripts", s + "/scripts.txt", "-n", "20", "--seed", "42", "--out", d},
        {"segment", "--manifest", d + "/manifest.jsonl", "--out", g},
        {"sot", "--manifest", g + "/manifest.jsonl", "--out", t},
        {"score", "--manifest", g + "/manifest.jsonl", "--hyp", t + "/sot.jsonl", "--out", r},
    };
    for (const auto& step : steps) {
      const auto res = cli(step);
      if (res.code != 0) {
        o.fail(step[0] + " exited " + std::to_string(res.code) + ": " + res.err);
        return o;
      }
      if (step[0] == "score") score_line = res.out;
    }
    worst_t = std::max(worst_t, seconds_since(t0));
    manifests.push_back(read_file(d + "/manifest.jsonl") + read_file(g + "/manifest.jsonl"));
    reports.push_back(read_file(r + "/report.json"));
    wavs.push_back(read_file(d + "/audio/conv_000019.wav"));
  }
  if (manifests[0] != manifests[1]) o.fail("manifests differ between runs");
  if (reports[0] != reports[1] || wavs[0] != wavs[1]) o.fail("outputs differ between runs");
  if (score_line != "cpWER 0.00%\n") o.fail("self-score printed " + score_line);
  if (worst_t >= kPipelineSeconds) o.fail(fmt("pipeline took %.1f s", worst_t));
  if (o.pass) o.detail = fmt("20 conversations, slowest run %.2f s", worst_t);
  return o;
}

Outcome grouping_oracle() {
  Outcome o;
  Rng rng(909);
  for (int k = 0; k < 200; ++k) {
    std::vector<UtteranceSegment> segs;
    std::vector<oracle::Interval> iv;
    for (std::size_t i = 0, n = 1 + rng.index(20); i < n; ++i) {
      // Coarse grid so touching and identical endpoints show up.
      const double start = 0.5 * static_cast<double>(rng.index(40));
      const double end = start + 0.5 * static_cast<double>(1 + rng.index(6));
      segs.push_back({SpeakerId("S" + std::to_string(i)), start, end, "w" + std::to_string(i), {}});
      iv.push_back({start, end});
    }
    GroupingParams params;
    params.max_span = 1e9;
    const auto grouping = group_utterances(segs, params);
    std::set<std::set<std::size_t>> got;
    for (const auto& g : grouping.groups) {
      std::set<std::size_t> members;
      for (const auto& s : g.segments) members.insert(std::stoul(s.speaker.label.substr(1)));
      got.insert(members);
    }
    if (got != oracle::closure_groups(iv, params.gap_threshold)) o.fail("mismatch at set " + std::to_string(k));
  }
  if (o.pass) o.detail = "200 segment sets";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"cpWER equals brute-force permutation minimum", cpwer_oracle},
      {"cpWER label permutation and single-speaker invariances", cpwer_invariance},
      {"corpus cpWER reconstructs from per-group report", corpus_accumulation},
      {"edit distance matches exhaustive alignment", edit_distance},
      {"band-limit, resampler and convolution accuracy", dsp_checks},
      {"RIR direct path and RT60 against Sabine", rir_checks},
      {"overlap steering, span cap, no same-speaker overlap", assembly_contracts},
      {"end-to-end determinism and self-score", end_to_end},
      {"grouping equals transitive closure", grouping_oracle},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << criteria[i].first << " ("
              << o.detail << ")" << std::endl;
  }
  return failed;
}
