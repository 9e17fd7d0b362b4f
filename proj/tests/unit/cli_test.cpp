// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "eqscene/cli/cli.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

// Runs the installed binary; stderr is folded into the captured text.
Run run_binary(const std::string& args) {
  const std::string cmd = std::string(EQSCENE_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

Run run_in_process(std::vector<std::string> args) {
  args.insert(args.begin(), "eqscene");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = eqscene::cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str() + err.str();
  return r;
}

std::string gen_args(const fs::path& out) {
  return "gen-data --mnist " + std::string(EQSCENE_MNIST_DIR) + " --train-sequences 3 --test-sequences 2 --backgrounds 4 --seed 5 --out " + out.string();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(std::ifstream(p)); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("help and usage errors") {
    const auto help = run_binary("--help");
    CHECK(help.code == 0);
    CHECK(help.out.find("gen-data") != std::string::npos);
    CHECK(run_binary("train --help").code == 0);
    CHECK(run_binary("").code == 2);
    CHECK(run_binary("frobnicate").code == 2);
    CHECK(run_binary("train --steps ten --out x").code == 2);
    CHECK(run_binary("render --mode sideways --out x").code == 2);
    const auto missing = run_binary("train --data /nonexistent/eqscene --out " + oracle::temp_dir("cli_missing").string());
    CHECK(missing.code == 2);
    CHECK(missing.out.find("error[usage]") != std::string::npos);
    CHECK(run_binary("gen-data --mnist " + std::string(EQSCENE_MNIST_DIR)).code == 2);
  }

  TEST_CASE("selftest") {
    const auto r = run_binary("selftest");
    CHECK(r.code == 0);
    CHECK(r.out.find("FAIL") == std::string::npos);
  }

  TEST_CASE("gen-data is deterministic and records its config") {
    const auto a = oracle::temp_dir("cli_gen_a");
    const auto b = oracle::temp_dir("cli_gen_b");
    REQUIRE(run_binary(gen_args(a)).code == 0);
    REQUIRE(run_binary(gen_args(b) + " --threads 1").code == 0);
    fs::remove(a / "run_config.json");
    const auto rc = read_json(b / "run_config.json");
    fs::remove(b / "run_config.json");
    std::string why;
    CHECK_MESSAGE(oracle::same_tree(a, b, &why), why);
    CHECK(rc.at("subcommand") == "gen-data");
    CHECK(rc.at("seed") == 5);
    CHECK(rc.at("dataset").at("backgrounds_per_split") == 4);
    CHECK(rc.contains("config_hash"));
  }

  TEST_CASE("corrupt data exits with the data format code") {
    const auto d = oracle::temp_dir("cli_corrupt");
    REQUIRE(run_in_process({"gen-data", "--mnist", EQSCENE_MNIST_DIR, "--train-sequences", "2", "--test-sequences",
                            "2", "--backgrounds", "4", "--out", d.string()})
                .code == 0);
    std::ofstream(d / "train" / "manifest.json", std::ios::trunc) << "{\"version\": ";
    const auto r = run_binary("train --data " + d.string() + " --steps 1 --out " + (d / "run").string());
    CHECK(r.code == 3);
    CHECK(r.out.find("error[data_format]") != std::string::npos);

    const auto bad_mnist = oracle::temp_dir("cli_bad_mnist");
    std::ofstream(bad_mnist / "train-images-idx3-ubyte") << "not an idx file";
    CHECK(run_in_process({"gen-data", "--mnist", bad_mnist.string(), "--out", (d / "x").string()}).code == 3);
  }

  TEST_CASE("config file fills options the command line leaves unset") {
    const auto d = oracle::temp_dir("cli_config");
    std::ofstream(d / "cfg.json") << R"({"training.steps": 2, "training.batch_size": 2, "seed": 11,
                                          "model.profile": "desk_cpu", "training.procedural_sequences": 4,
                                          "training.alpha_equiv": 3.5, "log_every": 0})";
    const auto r = run_in_process({"train", "--config", (d / "cfg.json").string(), "--seed", "12", "--mnist",
                                   EQSCENE_MNIST_DIR, "--out", (d / "run").string()});
    REQUIRE_MESSAGE(r.code == 0, r.out);
    const auto rc = read_json(d / "run" / "run_config.json");
    CHECK(rc.at("seed") == 12);
    CHECK(rc.at("training").at("steps") == 2);
    CHECK(rc.at("training").at("batch_size") == 2);
    CHECK(rc.at("training").at("alpha_equiv") == 3.5);
    CHECK(rc.at("model_profile") == "desk_cpu");
    CHECK(fs::exists(d / "run" / "final.ckpt"));

    std::ofstream(d / "typo.json") << R"({"training.stepz": 2})";
    CHECK(run_in_process({"train", "--config", (d / "typo.json").string(), "--out", (d / "t").string()}).code == 2);
    std::ofstream(d / "broken.json") << "{";
    CHECK(run_in_process({"train", "--config", (d / "broken.json").string(), "--out", (d / "t").string()}).code == 2);
  }

  TEST_CASE("eval and analyze write their reports") {
    const auto d = oracle::temp_dir("cli_eval");
    REQUIRE(run_in_process({"gen-data", "--mnist", EQSCENE_MNIST_DIR, "--train-sequences", "2", "--test-sequences",
                            "2", "--backgrounds", "4", "--out", (d / "data").string()})
                .code == 0);
    const auto ev = run_in_process({"eval", "--data", (d / "data").string(), "--mnist", EQSCENE_MNIST_DIR, "--n", "8",
                                    "--out", (d / "eval").string()});
    REQUIRE_MESSAGE(ev.code == 0, ev.out);
    CHECK(read_json(d / "eval" / "stats.json").size() == 2);
    CHECK(fs::exists(d / "eval" / "mse_boxplot.svg"));
    const auto an = run_in_process({"analyze-transforms", "--source", "gt", "--n", "50", "--mnist", EQSCENE_MNIST_DIR,
                                    "--out", (d / "an").string()});
    REQUIRE_MESSAGE(an.code == 0, an.out);
    CHECK(read_json(d / "an" / "transform_stats.json").at("source") == "gt");
    CHECK(run_in_process({"analyze-transforms", "--source", "learned", "--mnist", EQSCENE_MNIST_DIR, "--out",
                          (d / "an2").string()})
              .code == 2);
  }
}
