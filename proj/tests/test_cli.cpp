// Runs the wspalign binary and checks exit codes and output.

#include <sys/wait.h>

#include <cstdlib>

#include <gtest/gtest.h>

#include "json.hpp"

#include "support.hpp"
#include "wsp/io.hpp"

using namespace wsp;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run wspalign(const test::TempDir& dir, const std::string& args) {
  const auto out = dir.file("stdout.txt"), err = dir.file("stderr.txt");
  const std::string cmd = std::string(WSPALIGN_BIN) + " " + args + " >" + out + " 2>" + err;
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, io::read_file(out), io::read_file(err)};
}

}  // namespace

TEST(Cli, HelpExitsZero) {
  test::TempDir dir;
  const auto r = wspalign(dir, "--help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("pipeline"), std::string::npos);
}

TEST(Cli, EvalPerfectPrediction) {
  test::TempDir dir;
  const auto gold = dir.write("gold.txt", "0-0 1-1\n0-1 1?0\n");
  const auto pred = dir.write("pred.txt", "0-0 1-1\n0-1\n");
  const auto r = wspalign(dir, "eval --work-dir " + dir.file("w") + " --gold " + gold + " --alignments " + pred);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "P=1.000 R=1.000 F1=1.000 AER=0.000\n");
  const auto j = wspalign(dir, "eval --json --work-dir " + dir.file("w") + " --gold " + gold + " --alignments " + pred);
  EXPECT_EQ(nlohmann::json::parse(j.out)["f1"], 1.0);
}

TEST(Cli, PairOnEmptyCorpus) {
  test::TempDir dir;
  dir.write("raw.jsonl", "");
  const auto w = dir.file("w");
  EXPECT_EQ(wspalign(dir, "ingest --work-dir " + w + " --raw " + dir.file("raw.jsonl")).code, 0);
  EXPECT_EQ(wspalign(dir, "index --work-dir " + w).code, 0);
  const auto r = wspalign(dir, "pair --work-dir " + w);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(io::read_file(dir.file("w/pairs.jsonl")), "");
}

TEST(Cli, MissingDatasetNamesPath) {
  test::TempDir dir;
  const auto r = wspalign(dir, "-q train --work-dir " + dir.file("w"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("dataset.json"), std::string::npos) << r.err;
}

TEST(Cli, ConfigErrorsExitOne) {
  test::TempDir dir;
  const auto cfg = dir.write("c.json", R"({"foo": 1})");
  auto r = wspalign(dir, "stats --config " + cfg);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("foo"), std::string::npos);
  EXPECT_EQ(wspalign(dir, "stats --min-subwords 50 --max-subwords 10").code, 1);
  EXPECT_EQ(wspalign(dir, "frobnicate").code, 1);
  EXPECT_EQ(wspalign(dir, "").code, 1);
}

TEST(Cli, BadDataExitsTwo) {
  test::TempDir dir;
  const auto raw = dir.write("raw.jsonl", "{not json\n");
  const auto r = wspalign(dir, "ingest --work-dir " + dir.file("w") + " --raw " + raw);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("raw.jsonl:1"), std::string::npos) << r.err;
}
