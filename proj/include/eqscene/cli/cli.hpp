// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "eqscene/datagen/generator.hpp"
#include "eqscene/model/config.hpp"
#include "eqscene/train/trainer.hpp"

namespace eqscene::cli {

enum ExitCode : int { kOk = 0, kRuntime = 1, kUsage = 2, kDataFormat = 3 };

/// Everything a subcommand ran with. Written as run_config.json into each
/// artifact directory; the output directory itself is not recorded.
struct RunConfig {
  std::string subcommand;
  std::uint64_t seed = 0;
  bool deterministic = false;
  std::string mnist_dir;
  std::string data_dir;
  std::string checkpoint;
  std::string resume;

  datagen::DatasetConfig dataset;
  int train_sequences = 20000;
  int test_sequences = 2000;

  std::string model_profile = "default";
  train::TrainingConfig training;
  int procedural_sequences = 0;  // train on in-memory sequences instead of --data

  std::string render_mode = "recon";
  int eval_n = 10000;
  int eval_batch = 64;
  std::string transform_source = "gt";
  int analyze_n = 40000;

  model::ModelConfig model_config() const;
  nlohmann::json to_json() const;
  std::string hash() const;
};

/// Fixed checks of the warp against a brute-force sampler and of the loss
/// identities; needs no data. Returns the number of failures.
int selftest(std::ostream& out);

/// Entry point. Returns an ExitCode; errors print one line
/// "eqscene: error[<category>]: <message>" to `err`.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace eqscene::cli
