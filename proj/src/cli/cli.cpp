// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#include "eqscene/cli/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "eqscene/datagen/dataset.hpp"
#include "eqscene/datagen/mnist.hpp"
#include "eqscene/eval/eval.hpp"
#include "eqscene/kernels/conv.hpp"
#include "eqscene/manip/manip.hpp"
#include "eqscene/model/checkpoint.hpp"

#ifndef EQSCENE_DEFAULT_MNIST_DIR
#define EQSCENE_DEFAULT_MNIST_DIR "data/mnist"
#endif

namespace eqscene::cli {

namespace fs = std::filesystem;

// ------------------------------------------------------------- RunConfig

model::ModelConfig RunConfig::model_config() const {
  model::ModelConfig m;
  if (model_profile == "desk_cpu") {
    m = model::ModelConfig::desk_cpu();
  } else if (model_profile != "default") {
    throw UsageError("unknown model profile '" + model_profile + "'");
  }
  m.seed = seed;
  return m;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j{{"subcommand", subcommand}, {"seed", seed}, {"deterministic", deterministic}};
  if (subcommand == "gen-data") {
    j["mnist"] = mnist_dir;
    j["dataset"] = dataset.to_json();
    j["train_sequences"] = train_sequences;
    j["test_sequences"] = test_sequences;
  } else if (subcommand == "train") {
    j["data"] = data_dir;
    j["mnist"] = mnist_dir;
    j["procedural_sequences"] = procedural_sequences;
    if (procedural_sequences > 0) j["dataset"] = dataset.to_json();
    j["resume"] = resume;
    j["model_profile"] = model_profile;
    j["model"] = model_config().to_json();
    j["training"] = training.to_json();
  } else if (subcommand == "render") {
    j["data"] = data_dir;
    j["checkpoint"] = checkpoint;
    j["mode"] = render_mode;
  } else if (subcommand == "eval") {
    j["data"] = data_dir;
    j["mnist"] = mnist_dir;
    j["checkpoint"] = checkpoint;
    j["n"] = eval_n;
    j["batch"] = eval_batch;
  } else if (subcommand == "analyze-transforms") {
    j["data"] = data_dir;
    j["mnist"] = mnist_dir;
    j["checkpoint"] = checkpoint;
    j["source"] = transform_source;
    j["n"] = analyze_n;
    j["dataset"] = dataset.to_json();
  }
  return j;
}

std::string RunConfig::hash() const { return model::json_digest(to_json()); }

namespace {

void write_run_config(const RunConfig& rc, const fs::path& dir) {
  fs::create_directories(dir);
  nlohmann::json j = rc.to_json();
  j["config_hash"] = rc.hash();
  std::ofstream out(dir / "run_config.json", std::ios::trunc);
  if (!out) throw RuntimeError("cannot write run_config.json in " + dir.string());
  out << j.dump(2) << '\n';
}

std::string default_mnist_dir() {
  if (const char* env = std::getenv("EQSCENE_MNIST_DIR"); env != nullptr && *env != '\0') return env;
  return EQSCENE_DEFAULT_MNIST_DIR;
}

void require_dir(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string(what) + " is required");
  if (!fs::is_directory(path)) throw UsageError(std::string(what) + " '" + path + "' is not a directory");
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string(what) + " is required");
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " '" + path + "' does not exist");
}

// ------------------------------------------------------------ commands

int cmd_gen_data(const RunConfig& rc, const fs::path& out_dir, std::ostream& out) {
  require_dir(rc.mnist_dir, "--mnist");
  if (rc.train_sequences < 0 || rc.test_sequences < 0) throw UsageError("sequence counts must be non-negative");
  auto cfg = rc.dataset;
  cfg.seed = rc.seed;
  const auto mnist = datagen::load_mnist(rc.mnist_dir);
  const auto g = datagen::gen_dataset(cfg, mnist, out_dir, rc.train_sequences, rc.test_sequences);
  RunConfig recorded = rc;
  recorded.dataset = cfg;
  write_run_config(recorded, out_dir);
  out << "wrote " << g.train.num_sequences << " train and " << g.test.num_sequences << " test sequences to "
      << out_dir.string() << " (config " << g.train.config_hash << ")\n";
  return kOk;
}

int cmd_train(RunConfig rc, const fs::path& out_dir, int log_every, std::ostream& out) {
  std::unique_ptr<datagen::SequenceSource> data;
  if (rc.procedural_sequences > 0) {
    require_dir(rc.mnist_dir, "--mnist");
    auto mnist = datagen::load_mnist(rc.mnist_dir);
    data = std::make_unique<datagen::ProceduralDataset>(rc.dataset, datagen::Split::train, std::move(mnist.train),
                                                        rc.procedural_sequences);
  } else {
    require_dir(rc.data_dir, "--data");
    data = datagen::DiskDataset::open(rc.data_dir, datagen::Split::train);
  }
  rc.training.data_path = rc.procedural_sequences > 0 ? "procedural:" + std::to_string(rc.procedural_sequences) : rc.data_dir;
  rc.training.seed = rc.seed;
  rc.training.validate();
  model::SceneModel m(rc.model_config());
  write_run_config(rc, out_dir);

  train::TrainLoopOptions opts;
  opts.out_dir = out_dir;
  if (!rc.resume.empty()) {
    require_file(rc.resume, "--resume");
    opts.resume = rc.resume;
  }
  const auto t0 = std::chrono::steady_clock::now();
  opts.on_step = [&](std::int64_t s, const train::LossBreakdown& l) {
    if (log_every > 0 && ((s + 1) % log_every == 0 || s + 1 == rc.training.steps)) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      out << "step " << s + 1 << "/" << rc.training.steps << " total " << l.total << " scene " << l.scene
          << " equiv " << l.equiv << " inv " << l.inv << " (" << static_cast<int>(secs) << "s)\n"
          << std::flush;
    }
  };
  const auto r = train::train_loop(m, *data, rc.training, opts);
  out << "trained steps " << r.start_step << ".." << r.final_step << "; checkpoint " << r.final_checkpoint.string()
      << '\n';
  return kOk;
}

int cmd_render(const RunConfig& rc, const fs::path& out_dir, std::ostream& out) {
  require_file(rc.checkpoint, "--checkpoint");
  require_dir(rc.data_dir, "--data");
  const auto mode = manip::figure_mode_from_string(rc.render_mode);
  const auto m = model::load_model(rc.checkpoint);
  const auto data = datagen::DiskDataset::open(rc.data_dir, datagen::Split::test);
  const auto figs = manip::build_figures(*m, *data, mode, rc.seed);
  for (const auto& f : figs) {
    const fs::path png = out_dir / (f.name + ".png");
    manip::render_figure_grid(f.rows, png);
    out << "wrote " << png.string() << " (" << f.rows.size() << "x" << f.rows.front().size() << ")\n";
  }
  write_run_config(rc, out_dir);
  return kOk;
}

int cmd_eval(const RunConfig& rc, const fs::path& out_dir, std::ostream& out) {
  require_dir(rc.data_dir, "--data");
  require_dir(rc.mnist_dir, "--mnist");
  const auto data = datagen::DiskDataset::open(rc.data_dir, datagen::Split::test);
  const auto mnist = datagen::load_mnist(rc.mnist_dir);
  const auto pairs = eval::make_eval_set(rc.eval_n, rc.seed, data->config(), data->backgrounds(), mnist.test);
  std::vector<eval::MetricSummary> s;
  if (!rc.checkpoint.empty()) {
    require_file(rc.checkpoint, "--checkpoint");
    const auto m = model::load_model(rc.checkpoint);
    s.push_back(eval::eval_background_manip(*m, pairs, rc.eval_batch));
    s.push_back(eval::eval_transform_manip(*m, pairs, rc.eval_batch));
  }
  s.push_back(eval::baseline_video_frames(pairs));
  s.push_back(eval::baseline_no_object(pairs));
  eval::emit_report(s, out_dir);
  write_run_config(rc, out_dir);
  for (const auto& m : s) {
    out << m.name << ": PSNR " << m.mean_psnr << " +/- " << m.ci_psnr << " dB, MSE " << m.mean_mse << " (n=" << m.count
        << ")\n";
  }
  return kOk;
}

int cmd_analyze(RunConfig rc, const fs::path& out_dir, std::ostream& out) {
  require_dir(rc.mnist_dir, "--mnist");
  const auto source = eval::transform_source_from_string(rc.transform_source);
  if (!rc.data_dir.empty()) {
    require_dir(rc.data_dir, "--data");
    rc.dataset = datagen::DiskDataset::open(rc.data_dir, datagen::Split::train)->config();
  }
  const auto mnist = datagen::load_mnist(rc.mnist_dir);
  std::unique_ptr<model::SceneModel> m;
  if (source == eval::TransformSource::learned) {
    require_file(rc.checkpoint, "--checkpoint");
    m = model::load_model(rc.checkpoint);
  }
  const auto st = eval::analyze_transform_stats(source, m.get(), rc.analyze_n, rc.seed, rc.dataset, mnist.train);
  fs::create_directories(out_dir);
  nlohmann::json j = st.to_json();
  j["source"] = rc.transform_source;
  std::ofstream(out_dir / "transform_stats.json") << j.dump(2) << '\n';
  write_run_config(rc, out_dir);
  out << j.dump(2) << '\n';
  return kOk;
}

// ---------------------------------------------------------- config file

// Applies a flat {"dotted.key": value} file to options not given on the command line.
void apply_config_file(const std::string& path, CLI::App& sub, const std::map<std::string, std::string>& keys) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw UsageError("config file must hold a JSON object of dotted keys");
  for (const auto& [key, value] : j.items()) {
    const auto it = keys.find(key);
    if (it == keys.end()) throw UsageError("unknown config key '" + key + "'");
    CLI::Option* opt = sub.get_option_no_throw(it->second);
    if (opt == nullptr) throw UsageError("config key '" + key + "' does not apply to " + sub.get_name());
    if (opt->count() > 0) continue;  // the command line wins
    opt->add_result(value.is_string() ? value.get<std::string>() : value.dump());
    opt->run_callback();
  }
}

}  // namespace

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig rc;
  rc.mnist_dir = default_mnist_dir();
  std::string out_dir;
  std::string config_file;
  int threads = 0;
  int log_every = 100;

  CLI::App app{"Equivariant object and invariant background codes from video pairs", "eqscene"};
  app.require_subcommand(1);
  app.fallthrough();

  // key -> flag name, for config files.
  std::map<std::string, std::string> keys;
  auto add = [&](CLI::App* sub, const std::string& flag, const std::string& key, auto& var, const std::string& help) {
    keys[key] = flag;
    return sub->add_option(flag, var, help);
  };
  auto common = [&](CLI::App* sub, bool needs_out) {
    add(sub, "--seed", "seed", rc.seed, "Global seed");
    sub->add_flag("--deterministic", rc.deterministic, "Single-threaded numerics for bit-exact runs");
    keys["deterministic"] = "--deterministic";
    add(sub, "--threads", "threads", threads, "OpenMP threads (0 keeps the default)");
    sub->add_option("--config", config_file, "JSON file of dotted keys; flags override it");
    if (needs_out) add(sub, "--out", "out", out_dir, "Output directory");
  };

  auto* gen = app.add_subcommand("gen-data", "Generate the moving-digit dataset");
  common(gen, true);
  add(gen, "--mnist", "mnist", rc.mnist_dir, "Directory with MNIST IDX files (gzip or raw)");
  add(gen, "--train-sequences", "dataset.train_sequences", rc.train_sequences, "Train sequences");
  add(gen, "--test-sequences", "dataset.test_sequences", rc.test_sequences, "Test sequences");
  add(gen, "--frames", "dataset.frames", rc.dataset.frames, "Frames per sequence");
  add(gen, "--backgrounds", "dataset.backgrounds", rc.dataset.backgrounds_per_split, "Backgrounds per split");
  add(gen, "--rotation-probability", "dataset.rotation_probability", rc.dataset.rotation_probability,
      "Probability that a step is a rotation");

  auto* tr = app.add_subcommand("train", "Train the scene model");
  common(tr, true);
  add(tr, "--data", "data", rc.data_dir, "Dataset root written by gen-data");
  add(tr, "--mnist", "mnist", rc.mnist_dir, "MNIST directory (procedural data only)");
  add(tr, "--procedural-sequences", "training.procedural_sequences", rc.procedural_sequences,
      "Train on this many sequences rendered in memory instead of --data");
  add(tr, "--data-seed", "dataset.seed", rc.dataset.seed, "Dataset seed for procedural data");
  add(tr, "--steps", "training.steps", rc.training.steps, "Optimizer steps");
  add(tr, "--alpha-equiv", "training.alpha_equiv", rc.training.weights.alpha_equiv, "Weight of the equivariance loss");
  add(tr, "--alpha-inv", "training.alpha_inv", rc.training.weights.alpha_inv, "Weight of the invariance loss");
  add(tr, "--batch-size", "training.batch_size", rc.training.batch_size, "Pairs per step");
  add(tr, "--lr", "training.learning_rate", rc.training.optimizer.learning_rate, "AdamW learning rate");
  add(tr, "--weight-decay", "training.weight_decay", rc.training.optimizer.weight_decay, "AdamW decoupled weight decay");
  add(tr, "--checkpoint-every", "training.checkpoint_every", rc.training.checkpoint_every, "Checkpoint cadence in steps");
  add(tr, "--resume", "training.resume", rc.resume, "Continue from a checkpoint of the same run");
  add(tr, "--profile", "model.profile", rc.model_profile, "Model size: default or desk_cpu")
      ->check(CLI::IsMember({"default", "desk_cpu"}));
  add(tr, "--log-every", "log_every", log_every, "Print losses every N steps (0 disables)");

  auto* rn = app.add_subcommand("render", "Render manipulation figures");
  common(rn, true);
  add(rn, "--mode", "render.mode", rc.render_mode, "recon, swap-bg, retarget, mix or gt-transform")
      ->check(CLI::IsMember({"recon", "swap-bg", "retarget", "mix", "gt-transform"}));
  add(rn, "--checkpoint", "checkpoint", rc.checkpoint, "Model checkpoint");
  add(rn, "--data", "data", rc.data_dir, "Dataset root (test split is used)");

  auto* ev = app.add_subcommand("eval", "Manipulation metrics and baselines");
  common(ev, true);
  add(ev, "--checkpoint", "checkpoint", rc.checkpoint, "Model checkpoint (omit for baselines only)");
  add(ev, "--data", "data", rc.data_dir, "Dataset root (test split config and backgrounds)");
  add(ev, "--mnist", "mnist", rc.mnist_dir, "MNIST directory");
  add(ev, "--n", "eval.n", rc.eval_n, "Evaluation pairs");
  add(ev, "--eval-batch", "eval.batch", rc.eval_batch, "Pairs per forward pass");

  auto* an = app.add_subcommand("analyze-transforms", "Statistics of ground-truth or learned transforms");
  common(an, true);
  add(an, "--source", "analyze.source", rc.transform_source, "gt or learned")->check(CLI::IsMember({"gt", "learned"}));
  add(an, "--n", "analyze.n", rc.analyze_n, "Frame pairs");
  add(an, "--checkpoint", "checkpoint", rc.checkpoint, "Model checkpoint (learned source)");
  add(an, "--data", "data", rc.data_dir, "Dataset root whose config to use");
  add(an, "--mnist", "mnist", rc.mnist_dir, "MNIST directory");
  add(an, "--data-seed", "dataset.seed", rc.dataset.seed, "Dataset seed when --data is not given");

  auto* st = app.add_subcommand("selftest", "Warp oracle and loss identity checks; needs no data");
  st->add_flag("--deterministic", rc.deterministic, "Single-threaded numerics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    // Subcommand help arrives as a CallForHelp raised from the subcommand.
    if (e.get_exit_code() == 0) {
      for (auto* sub : app.get_subcommands()) out << sub->help();
      if (app.get_subcommands().empty()) out << app.help();
      return kOk;
    }
    err << "eqscene: error[usage]: " << e.what() << '\n';
    return kUsage;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    rc.subcommand = sub->get_name();
    if (!config_file.empty()) apply_config_file(config_file, *sub, keys);
    if (rc.subcommand != "selftest" && out_dir.empty()) throw UsageError("--out is required");
    if (rc.deterministic) {
      kernels::set_num_threads(1);
    } else if (threads > 0) {
      kernels::set_num_threads(threads);
    }
    if (rc.subcommand == "selftest") return selftest(out) == 0 ? kOk : kRuntime;
    if (rc.subcommand == "gen-data") return cmd_gen_data(rc, out_dir, out);
    if (rc.subcommand == "train") return cmd_train(rc, out_dir, log_every, out);
    if (rc.subcommand == "render") return cmd_render(rc, out_dir, out);
    if (rc.subcommand == "eval") return cmd_eval(rc, out_dir, out);
    if (rc.subcommand == "analyze-transforms") return cmd_analyze(rc, out_dir, out);
    throw UsageError("unknown subcommand " + rc.subcommand);
  } catch (const Error& e) {
    const char* cat = e.category() == ErrorCategory::usage         ? "usage"
                      : e.category() == ErrorCategory::data_format ? "data_format"
                                                                   : "runtime";
    err << "eqscene: error[" << cat << "]: " << e.what() << '\n';
    return static_cast<int>(e.category());
  } catch (const CLI::Error& e) {
    err << "eqscene: error[usage]: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "eqscene: error[runtime]: " << e.what() << '\n';
    return kRuntime;
  }
}

}  // namespace eqscene::cli
