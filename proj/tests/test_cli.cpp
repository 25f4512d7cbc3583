// tests/test_cli.cpp

// Copyright 2026  mismatch-sv authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Black-box tests of the installed binary: argument handling, exit codes,
// and a few end-to-end subcommand flows.  The binary path arrives in the
// MISMATCH_SV_BIN environment variable (set by the test harness).

#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <fstream>

#include "mismatch_sv/io.hpp"
#include "test_helpers.hpp"

using testutil::TempDir;

namespace {

std::string binary_path() {
  const char *env = std::getenv("MISMATCH_SV_BIN");
  return env == nullptr ? std::string() : std::string(env);
}

struct RunResult {
  int exit_code;
  std::string output;
};

RunResult run_cli(const std::string &args, const TempDir &dir,
                  const std::string &tag) {
  const std::string out_file = dir.file("cli_out_" + tag + ".txt");
  const std::string command =
      binary_path() + " " + args + " > " + out_file + " 2>&1";
  const int status = std::system(command.c_str());
  std::ifstream in(out_file);
  std::stringstream ss;
  ss << in.rdbuf();
  const int exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return {exit_code, ss.str()};
}

void write_file(const std::string &path, const std::string &content) {
  std::ofstream out(path);
  out << content;
}

}  // namespace

TEST_CASE("cli argument handling and exit codes", "[cli]") {
  if (binary_path().empty()) {
    WARN("MISMATCH_SV_BIN not set; skipping CLI tests");
    return;
  }
  TempDir dir("cli_args");

  SECTION("no arguments prints usage and exits 2") {
    RunResult r = run_cli("", dir, "noargs");
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("Usage") != std::string::npos);
  }
  SECTION("unknown flag exits 2") {
    RunResult r = run_cli("metrics --scores x --key y --bogus", dir, "badflag");
    CHECK(r.exit_code == 2);
  }
  SECTION("unknown subcommand exits 2") {
    RunResult r = run_cli("frobnicate", dir, "badcmd");
    CHECK(r.exit_code == 2);
  }
  SECTION("help exits 0") {
    RunResult r = run_cli("--help", dir, "help");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("simulate") != std::string::npos);
  }
  SECTION("missing input file exits 2") {
    RunResult r = run_cli("metrics --scores missing.txt --key missing.txt",
                          dir, "missing");
    CHECK(r.exit_code == 2);
  }
}

TEST_CASE("cli scores and evaluates a tiny corpus", "[cli]") {
  if (binary_path().empty()) {
    WARN("MISMATCH_SV_BIN not set; skipping CLI tests");
    return;
  }
  TempDir dir("cli_flow");

  write_file(dir.file("sim.json"), R"({
    "dim": 8,
    "n_speakers": 12,
    "sessions_per_speaker": 4,
    "between": {"type": "scaled_identity", "scale": 2.0},
    "within": {"type": "scaled_identity", "scale": 0.5}
  })");

  RunResult sim = run_cli(
      "simulate --config " + dir.file("sim.json") + " --seed 9 --out-vectors " +
          dir.file("v.vec") + " --out-labels " + dir.file("v.lab") +
          " --out-registry " + dir.file("p.reg") + " --out-trials " +
          dir.file("p.trials") + " --out-key " + dir.file("p.key") +
          " --enroll-sessions 2 --n-target 20 --n-nontarget 60",
      dir, "sim");
  REQUIRE(sim.exit_code == 0);

  RunResult pool = run_cli("preprocess --op pool --vectors " + dir.file("v.vec") +
                               " --registry " + dir.file("p.reg") +
                               " --labels " + dir.file("v.lab") + " --out " +
                               dir.file("models.vec"),
                           dir, "pool");
  REQUIRE(pool.exit_code == 0);

  RunResult score = run_cli(
      "score --backend cosine --models " + dir.file("models.vec") +
          " --segments " + dir.file("v.vec") + " --trials " +
          dir.file("p.trials") + " --out " + dir.file("s.txt"),
      dir, "score");
  REQUIRE(score.exit_code == 0);

  RunResult cluster = run_cli("--threads 1 cluster --vectors " +
                                  dir.file("v.vec") +
                                  " --mode kmeans --k 3 --seed 4 "
                                  "--out-labels " +
                                  dir.file("clusters.lab"),
                              dir, "cluster");
  REQUIRE(cluster.exit_code == 0);
  auto cluster_labels = msv::load_labels(dir.file("clusters.lab"));
  CHECK(cluster_labels.size() == 48);

  RunResult metrics = run_cli(
      "metrics --scores " + dir.file("s.txt") + " --key " + dir.file("p.key") +
          " --priors 0.01,0.005",
      dir, "metrics");
  REQUIRE(metrics.exit_code == 0);
  CHECK(metrics.output.find("eer\t") != std::string::npos);
  CHECK(metrics.output.find("min_cprimary\t") != std::string::npos);
  CHECK(metrics.output.find("act_cprimary\t") != std::string::npos);

  // Deterministic rerun: scoring the same trials again gives the same bytes.
  RunResult rescore = run_cli(
      "score --backend cosine --models " + dir.file("models.vec") +
          " --segments " + dir.file("v.vec") + " --trials " +
          dir.file("p.trials") + " --out " + dir.file("s2.txt"),
      dir, "rescore");
  REQUIRE(rescore.exit_code == 0);
  std::ifstream a(dir.file("s.txt")), b(dir.file("s2.txt"));
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  CHECK(sa.str() == sb.str());
}

TEST_CASE("cli pipeline check mode flags bad configs", "[cli]") {
  if (binary_path().empty()) {
    WARN("MISMATCH_SV_BIN not set; skipping CLI tests");
    return;
  }
  TempDir dir("cli_pipe");

  write_file(dir.file("bad.json"), R"({
    "workdir": ")" + dir.path().string() + R"(",
    "stages": [
      {"stage": "plda-interp", "in_domain": "a.mdl",
       "out_of_domain": "b.mdl", "model": "c.mdl"}
    ]
  })");
  RunResult bad = run_cli("pipeline --config " + dir.file("bad.json") + " --check",
                          dir, "bad");
  CHECK(bad.exit_code == 2);
  CHECK(bad.output.find("a.mdl") != std::string::npos);

  write_file(dir.file("good.json"), R"({
    "workdir": ")" + dir.path().string() + R"(",
    "stages": [
      {"stage": "simulate",
       "sim": {"dim": 4, "n_speakers": 5, "sessions_per_speaker": 3},
       "seed": 1, "vectors": "v.vec"}
    ]
  })");
  RunResult good = run_cli(
      "pipeline --config " + dir.file("good.json") + " --check", dir, "good");
  CHECK(good.exit_code == 0);
  CHECK(good.output.find("ok") != std::string::npos);

  RunResult run = run_cli("pipeline --config " + dir.file("good.json"), dir,
                          "run");
  CHECK(run.exit_code == 0);
  CHECK(std::filesystem::exists(dir.path() / "v.vec"));
}

TEST_CASE("cli distinguishes numerical failures from usage errors", "[cli]") {
  if (binary_path().empty()) {
    WARN("MISMATCH_SV_BIN not set; skipping CLI tests");
    return;
  }
  TempDir dir("cli_numeric");
  // A cohort of identical vectors gives zero score spread: a numerical
  // failure (exit 3), not a usage error.
  write_file(dir.file("m.vec"), "m1 1.0 0.0\n");
  write_file(dir.file("s.vec"), "s1 0.0 1.0\n");
  write_file(dir.file("c.vec"), "c1 1.0 1.0\nc2 1.0 1.0\n");
  write_file(dir.file("raw.txt"), "m1\ts1\t0.500000\n");

  RunResult r = run_cli("snorm --scores " + dir.file("raw.txt") + " --cohort " +
                            dir.file("c.vec") + " --models " + dir.file("m.vec") +
                            " --segments " + dir.file("s.vec") + " --out " +
                            dir.file("out.txt"),
                        dir, "sigma");
  CHECK(r.exit_code == 3);
  CHECK(r.output.find("spread") != std::string::npos);

  // The documented escape hatch passes raw scores through instead.
  RunResult ok = run_cli(
      "snorm --scores " + dir.file("raw.txt") + " --cohort " + dir.file("c.vec") +
          " --models " + dir.file("m.vec") + " --segments " + dir.file("s.vec") +
          " --fallback-raw --out " + dir.file("out.txt"),
      dir, "fallback");
  CHECK(ok.exit_code == 0);
  std::ifstream in(dir.file("out.txt"));
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == "m1\ts1\t0.500000\n");
}

TEST_CASE("cli fuse reports the first misaligned trial", "[cli]") {
  if (binary_path().empty()) {
    WARN("MISMATCH_SV_BIN not set; skipping CLI tests");
    return;
  }
  TempDir dir("cli_fuse");
  write_file(dir.file("a.txt"), "m1\ts1\t1.000000\nm2\ts2\t-1.000000\n");
  write_file(dir.file("b.txt"), "m1\ts1\t0.500000\nmX\tsY\t-0.500000\n");
  write_file(dir.file("k.txt"), "m1 s1 target\nm2 s2 nontarget\nmX sY nontarget\n");

  RunResult r = run_cli("fuse --scores " + dir.file("a.txt") + " --scores " +
                            dir.file("b.txt") + " --key " + dir.file("k.txt") +
                            " --model-out " + dir.file("f.mdl"),
                        dir, "fuse");
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("mX") != std::string::npos);
}
