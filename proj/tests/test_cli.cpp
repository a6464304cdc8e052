#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "convsynth/manifest.hpp"
#include "run_config.hpp"
#include "test_util.hpp"

using namespace convsynth;
using convsynth::cli::run_cli;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream o, e;
  const int code = run_cli(args, o, e);
  return {code, o.str(), e.str()};
}

std::string pool_file(const TempDir& dir) {
  const auto p = dir.path / "pool.txt";
  std::ofstream f(p);
  for (int i = 0; i < 10; ++i)
    f << "[S1] seed line number " << i << " about lunch plans [S2] sounds fine to me\n\n";
  return p.string();
}

}  // namespace

TEST(RunConfig, SnapshotRoundTrip) {
  cli::RunConfig a("synth");
  a.set("mode", "tts_stitch");
  a.set("scripts", "path with spaces/\"q\".txt");
  a.set("seed", "99");
  cli::RunConfig b("synth");
  b.merge_text(a.snapshot());
  EXPECT_EQ(a, b);
  EXPECT_EQ(b.snapshot(), a.snapshot());
}

TEST(RunConfig, UnknownKeyRejected) {
  cli::RunConfig c("segment");
  try {
    c.merge_text("gap_threshold = 0.1\nbogus_key = 3\n", "cfg");
    FAIL();
  } catch (const cli::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bogus_key"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("cfg:2"), std::string::npos);
  }
}

TEST(RunConfig, ValuesAndComments) {
  cli::RunConfig c("gen-transcripts");
  c.merge_text("# header\nn = 5  # trailing\ndelimiter = \"\\n---\\n\"\ntemperature=0.5\n");
  EXPECT_EQ(c.get_int("n"), 5);
  EXPECT_EQ(c.get("delimiter"), "\n---\n");
  EXPECT_DOUBLE_EQ(c.get_double("temperature"), 0.5);
  c.set("n", "five");
  EXPECT_THROW(c.get_int("n"), cli::ConfigError);
  EXPECT_THROW(c.merge_text("command = \"synth\"\n"), cli::ConfigError);
}

TEST(Cli, GenTranscriptsReproducible) {
  TempDir dir;
  const auto pool = pool_file(dir);
  const auto a = (dir.path / "a").string(), b = (dir.path / "b").string();
  ASSERT_EQ(run({"gen-transcripts", "--pool", pool, "-n", "5", "--seed", "3", "--out", a}).code, 0);
  ASSERT_EQ(run({"gen-transcripts", "--pool", pool, "-n", "5", "--seed", "3", "--jobs", "2", "--out", b}).code, 0);
  const auto text = read_file(dir.path / "a/scripts.txt");
  EXPECT_EQ(text, read_file(dir.path / "b/scripts.txt"));
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 9);
  EXPECT_TRUE(std::filesystem::exists(dir.path / "a/config_snapshot"));
}

TEST(Cli, GenTranscriptsZero) {
  TempDir dir;
  const auto r = run({"gen-transcripts", "--pool", pool_file(dir), "-n", "0", "--out", (dir.path / "o").string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(read_file(dir.path / "o/scripts.txt"), "");
}

TEST(Cli, InvalidConfigKeyIsUsageError) {
  TempDir dir;
  std::ofstream(dir.path / "c.cfg") << "not_a_key = 1\n";
  const auto r = run({"gen-transcripts", "--config", (dir.path / "c.cfg").string(), "--out", (dir.path / "o").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("not_a_key"), std::string::npos);
  EXPECT_EQ(run({"segment", "--set", "nope=1", "--out", (dir.path / "o").string()}).code, 2);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"synth", "-n", "1"}).code, 2);  // --out missing
  TempDir dir;
  EXPECT_EQ(run({"synth", "--mode", "warp", "--out", dir.path.string()}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, SynthOverlapFiveConversations) {
  TempDir dir;
  const auto out = dir.path / "d";
  const auto r = run({"synth", "--mode", "overlap_sim", "-n", "5", "--seed", "1", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t wavs = 0;
  for (const auto& e : std::filesystem::directory_iterator(out / "audio")) wavs += e.path().extension() == ".wav";
  EXPECT_EQ(wavs, 5u);
  EXPECT_EQ(read_manifest(out / "manifest.jsonl").size(), 5u);
  EXPECT_TRUE(std::filesystem::exists(out / "config_snapshot"));
}

TEST(Cli, SynthStitchProvenance) {
  TempDir dir;
  std::ofstream(dir.path / "s.txt") << "[S1] hello there [S2] hi\n\n[S1] yes [S2] no [S1] maybe\n";
  const auto out = dir.path / "d";
  const auto r = run({"synth", "--mode", "tts_stitch", "--scripts", (dir.path / "s.txt").string(), "-n", "2",
                      "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const auto& rec : read_manifest(out / "manifest.jsonl")) EXPECT_EQ(rec.provenance, Provenance::tts_stitch);
}

TEST(Cli, SnapshotReproducesOutput) {
  TempDir dir;
  const auto a = dir.path / "a", b = dir.path / "b";
  ASSERT_EQ(run({"synth", "-n", "3", "--seed", "11", "--set", "snr_db=20", "--out", a.string()}).code, 0);
  ASSERT_EQ(run({"synth", "--config", (a / "config_snapshot").string(), "--out", b.string()}).code, 0);
  EXPECT_EQ(read_file(a / "manifest.jsonl"), read_file(b / "manifest.jsonl"));
  EXPECT_EQ(read_file(a / "audio/conv_000002.wav"), read_file(b / "audio/conv_000002.wav"));
}

TEST(Cli, SegmentDiscardsLongChain) {
  TempDir dir;
  ManifestRecord r;
  r.id = "long";
  r.audio_path = "x.wav";
  for (int i = 0; i < 16; ++i)
    r.segments.push_back({SpeakerId(i % 2 ? "S2" : "S1"), i * 2.0, i * 2.0 + 2.5, "w" + std::to_string(i), {}});
  write_manifest({r}, dir.path / "m.jsonl");  // one chain spanning 32.5 s
  const auto res = run({"segment", "--manifest", (dir.path / "m.jsonl").string(), "--out", (dir.path / "g").string()});
  ASSERT_EQ(res.code, 0) << res.err;
  EXPECT_EQ(res.out, "groups 0 discarded 1\n");
  const auto back = read_manifest(dir.path / "g/manifest.jsonl");
  EXPECT_EQ(back[0].audio_path, "../x.wav");
}

TEST(Cli, SotSingleSpeakerHasNoChangeTokens) {
  TempDir dir;
  ManifestRecord r;
  r.id = "mono";
  r.segments = {{SpeakerId("S1"), 0, 1, "one", {}}, {SpeakerId("S1"), 0.5, 2, "two", {}}};
  write_manifest({r}, dir.path / "m.jsonl");
  const auto res = run({"sot", "--manifest", (dir.path / "m.jsonl").string(), "--out", (dir.path / "s").string()});
  ASSERT_EQ(res.code, 0) << res.err;
  const auto text = read_file(dir.path / "s/sot.jsonl");
  EXPECT_EQ(text.find("<sc>"), std::string::npos);
  EXPECT_NE(text.find("one two"), std::string::npos);
}

TEST(Cli, ScoreIdentical) {
  TempDir dir;
  ManifestRecord r;
  r.id = "c";
  r.segments = {{SpeakerId("S1"), 0, 1, "Hello there", {}}, {SpeakerId("S2"), 0.5, 2, "hi", {}}};
  write_manifest({r}, dir.path / "m.jsonl");
  ASSERT_EQ(run({"sot", "--manifest", (dir.path / "m.jsonl").string(), "--out", (dir.path / "s").string()}).code, 0);
  const auto res = run({"score", "--manifest", (dir.path / "m.jsonl").string(), "--hyp",
                        (dir.path / "s/sot.jsonl").string(), "--out", (dir.path / "r").string()});
  ASSERT_EQ(res.code, 0) << res.err;
  EXPECT_EQ(res.out, "cpWER 0.00%\n");
  EXPECT_TRUE(std::filesystem::exists(dir.path / "r/report.json"));
}

TEST(Cli, ScoreStructuralErrorIsNonzero) {
  TempDir dir;
  ManifestRecord r;
  r.id = "c";
  r.segments = {{SpeakerId("S1"), 0, 1, "x", {}}};
  write_manifest({r}, dir.path / "m.jsonl");
  std::ofstream(dir.path / "h.jsonl") << "{\"group_id\":\"zzz\",\"sot_text\":\"x\"}\n";
  const auto res = run({"score", "--manifest", (dir.path / "m.jsonl").string(), "--hyp",
                        (dir.path / "h.jsonl").string(), "--out", (dir.path / "r").string()});
  EXPECT_EQ(res.code, 1);
  EXPECT_NE(res.err.find("zzz"), std::string::npos);
}
