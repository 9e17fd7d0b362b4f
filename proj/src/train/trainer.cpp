// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#include "eqscene/train/trainer.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "eqscene/core/rng.hpp"
#include "eqscene/model/checkpoint.hpp"
#include "eqscene/warp/warp.hpp"

namespace eqscene::train {

namespace fs = std::filesystem;

// --------------------------------------------------------------- config

void TrainingConfig::validate() const {
  if (weights.alpha_equiv < 0.0 || weights.alpha_inv < 0.0) throw UsageError("alphas must be non-negative");
  if (batch_size < 1) throw UsageError("batch size must be positive");
  if (steps < 0) throw UsageError("steps must be non-negative");
  if (checkpoint_every < 0) throw UsageError("checkpoint cadence must be non-negative");
  if (!(optimizer.learning_rate >= 0.0)) throw UsageError("learning rate must be non-negative");
}

nlohmann::json TrainingConfig::to_json() const {
  return {{"alpha_equiv", weights.alpha_equiv},
          {"alpha_inv", weights.alpha_inv},
          {"batch_size", batch_size},
          {"steps", steps},
          {"optimizer",
           {{"name", "adamw"},
            {"learning_rate", optimizer.learning_rate},
            {"beta1", optimizer.beta1},
            {"beta2", optimizer.beta2},
            {"eps", optimizer.eps},
            {"weight_decay", optimizer.weight_decay}}},
          {"seed", seed},
          {"checkpoint_every", checkpoint_every},
          {"data_path", data_path}};
}

TrainingConfig TrainingConfig::from_json(const nlohmann::json& j) {
  TrainingConfig c;
  c.weights.alpha_equiv = j.value("alpha_equiv", c.weights.alpha_equiv);
  c.weights.alpha_inv = j.value("alpha_inv", c.weights.alpha_inv);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.steps = j.value("steps", c.steps);
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    c.optimizer.learning_rate = o.value("learning_rate", c.optimizer.learning_rate);
    c.optimizer.beta1 = o.value("beta1", c.optimizer.beta1);
    c.optimizer.beta2 = o.value("beta2", c.optimizer.beta2);
    c.optimizer.eps = o.value("eps", c.optimizer.eps);
    c.optimizer.weight_decay = o.value("weight_decay", c.optimizer.weight_decay);
  }
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.data_path = j.value("data_path", c.data_path);
  c.validate();
  return c;
}

std::string TrainingConfig::hash() const {
  nlohmann::json j = to_json();
  j.erase("steps");
  j.erase("checkpoint_every");
  j.erase("data_path");
  return model::json_digest(j);
}

std::string run_fingerprint(const model::SceneModel& model, const datagen::SequenceSource& data,
                            const TrainingConfig& cfg) {
  return model.config().hash() + "/" + std::to_string(model.config().seed) + "/" + cfg.hash() + "/" +
         data.fingerprint();
}

// -------------------------------------------------------------- batches

Batch sample_batch(const datagen::SequenceSource& data, int batch_size, std::uint64_t seed, std::int64_t step) {
  if (data.size() == 0) throw RuntimeError("training data is empty");
  if (batch_size < 1) throw ContractError("batch size must be positive");
  const int c = data.config().canvas;
  Batch b;
  b.step = step;
  b.seed = seed;
  b.x1 = Tensor(Shape{batch_size, 3, c, c});
  b.x2 = Tensor(Shape{batch_size, 3, c, c});
  b.sequence_ids.resize(static_cast<std::size_t>(batch_size));
  b.indices.resize(static_cast<std::size_t>(batch_size));
  std::string first_error;
#pragma omp parallel for schedule(static)
  for (int k = 0; k < batch_size; ++k) {
    try {
      Rng rng = Rng::derive(seed, {0x7472ULL, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(k)});
      const int id = static_cast<int>(rng.below(static_cast<std::uint64_t>(data.size())));
      const auto p = datagen::sample_frame_indices(rng, data.config().frames);
      auto [f1, f2] = data.frame_pair(id, p);
      std::copy(f1.storage().begin(), f1.storage().end(), b.x1.item(k).begin());
      std::copy(f2.storage().begin(), f2.storage().end(), b.x2.item(k).begin());
      b.sequence_ids[static_cast<std::size_t>(k)] = id;
      b.indices[static_cast<std::size_t>(k)] = p;
    } catch (const std::exception& e) {
#pragma omp critical(sample_batch_error)
      if (first_error.empty()) first_error = e.what();
    }
  }
  if (!first_error.empty()) throw RuntimeError(first_error);
  return b;
}

// ----------------------------------------------------------------- step

namespace {

// out = scale * (a - b), elementwise.
Tensor scaled_diff(const Tensor& a, const Tensor& b, double scale) {
  Tensor out(a.shape());
  const auto s = static_cast<float>(scale);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * (a[i] - b[i]);
  return out;
}

std::string describe_batch(const Batch& b) {
  std::ostringstream os;
  os << "step " << b.step << ", seed " << b.seed << ", sequences [";
  for (std::size_t k = 0; k < b.sequence_ids.size(); ++k) {
    os << (k ? " " : "") << b.sequence_ids[k] << ":" << b.indices[k].i << "->" << b.indices[k].j;
  }
  os << "]";
  return os.str();
}

}  // namespace

LossBreakdown forward_backward(model::SceneModel& m, const Batch& batch, const LossWeights& w) {
  const int n = batch.x1.n();
  require_shape(batch.x2.shape(), batch.x1.shape(), "train_step");
  if (!(batch.x1.shape() == m.frame_shape(n))) {
    throw ContractError("train_step: frames " + batch.x1.shape().str() + " do not fit the model");
  }
  nn::Tape tape_o, tape_b, tape_t, tape_g;
  const Tensor x12 = concat_batch(batch.x1, batch.x2);
  const Tensor zo = m.object_encoder().forward(x12, &tape_o);
  const Tensor zb = m.background_encoder().forward(x12, &tape_b);
  const Tensor z_o1 = slice_batch(zo, 0, n);
  const Tensor z_o2 = slice_batch(zo, n, n);
  const Tensor z_b1 = slice_batch(zb, 0, n);
  const Tensor z_b2 = slice_batch(zb, n, n);

  const Tensor theta = m.transform_net().forward(z_o1, z_o2, &tape_t);
  const std::span<const float> th(theta.data(), theta.size());
  Tensor warped;
  warp::affine_warp_forward<float>(z_o1, th, warped);
  const Tensor scene = model::SceneModel::compose_scene(warped, z_b1);
  const Tensor x2_hat = m.renderer().forward(scene, &tape_g);

  const LossBreakdown losses =
      loss_total(mean_squared_error(x2_hat, batch.x2), mean_squared_error(warped, z_o2),
                 mean_squared_error(z_b1, z_b2), w);
  if (!std::isfinite(losses.total)) {
    throw NonFiniteLossError("non-finite loss (scene " + std::to_string(losses.scene) + ", equiv " +
                             std::to_string(losses.equiv) + ", inv " + std::to_string(losses.inv) + ") at " +
                             describe_batch(batch));
  }

  // d/dx mean((a - b)^2) = 2 (a - b) / count.
  const double n_img = static_cast<double>(x2_hat.size());
  const double n_code = static_cast<double>(warped.size());
  const Tensor ds = m.renderer().backward(scaled_diff(x2_hat, batch.x2, 2.0 / n_img), tape_g);

  Tensor d_warped = ds;
  const Tensor d_equiv = scaled_diff(warped, z_o2, 2.0 * w.alpha_equiv / n_code);
  nn::add_inplace(d_warped, d_equiv);
  Tensor dz_o2 = d_equiv;
  nn::scale_inplace(dz_o2, -1.f);

  Tensor dz_b1 = ds;
  const Tensor d_inv = scaled_diff(z_b1, z_b2, 2.0 * w.alpha_inv / n_code);
  nn::add_inplace(dz_b1, d_inv);
  Tensor dz_b2 = d_inv;
  nn::scale_inplace(dz_b2, -1.f);

  Tensor dz_o1(z_o1.shape());
  Tensor dtheta(theta.shape());
  warp::affine_warp_backward<float>(z_o1, th, d_warped, &dz_o1, std::span<float>(dtheta.data(), dtheta.size()));
  const auto [g1, g2] = m.transform_net().backward(dtheta, tape_t);
  nn::add_inplace(dz_o1, g1);
  nn::add_inplace(dz_o2, g2);

  m.object_encoder().backward(concat_batch(dz_o1, dz_o2), tape_o);
  m.background_encoder().backward(concat_batch(dz_b1, dz_b2), tape_b);
  return losses;
}

LossBreakdown train_step(model::SceneModel& m, AdamW& opt, const Batch& batch, const TrainingConfig& cfg) {
  nn::zero_grad(m.parameters());
  const LossBreakdown losses = forward_backward(m, batch, cfg.weights);
  opt.step();
  return losses;
}

// ----------------------------------------------------------------- loop

namespace {

std::string ckpt_name(std::int64_t step) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "step_%08lld.ckpt", static_cast<long long>(step));
  return buf;
}

nlohmann::json metrics_record(std::int64_t step, const LossBreakdown& l) {
  return {{"step", step}, {"scene", l.scene}, {"equiv", l.equiv}, {"inv", l.inv}, {"total", l.total}};
}

std::vector<Tensor> optimizer_state(AdamW& opt) {
  std::vector<Tensor> aux = opt.first_moments();
  aux.insert(aux.end(), opt.second_moments().begin(), opt.second_moments().end());
  return aux;
}

// Keeps the records with step < limit; anything later belongs to the abandoned run.
void truncate_metrics(const fs::path& path, std::int64_t limit) {
  std::ifstream in(path);
  if (!in) return;
  std::vector<std::string> keep;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw DataFormatError("malformed record in " + path.string());
    if (j.at("step").get<std::int64_t>() < limit) keep.push_back(line);
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : keep) out << l << '\n';
}

}  // namespace

TrainResult train_loop(model::SceneModel& m, const datagen::SequenceSource& data, const TrainingConfig& cfg,
                       const TrainLoopOptions& opts) {
  cfg.validate();
  if (data.size() == 0) throw RuntimeError("training data is empty");
  if (!(m.frame_shape(1) == Shape{1, 3, data.config().canvas, data.config().canvas})) {
    throw UsageError("model image size does not match dataset canvas");
  }
  const fs::path ckpt_dir = opts.out_dir / "checkpoints";
  std::error_code ec;
  fs::create_directories(ckpt_dir, ec);
  if (ec) throw RuntimeError("cannot create " + ckpt_dir.string() + ": " + ec.message());

  AdamW opt(m.parameters(), cfg.optimizer);
  const std::string fingerprint = run_fingerprint(m, data, cfg);
  const nlohmann::json extra{{"run_fingerprint", fingerprint}, {"training", cfg.to_json()}};

  TrainResult r;
  const fs::path metrics_path = opts.out_dir / "metrics.jsonl";
  if (opts.resume) {
    const auto c = model::read_checkpoint(*opts.resume);
    const std::string stored = c.extra.value("run_fingerprint", std::string());
    if (stored != fingerprint) {
      throw ResumeMismatchError("checkpoint " + opts.resume->string() + " was written by run " + stored +
                                ", current run is " + fingerprint);
    }
    model::load_parameters(m, c);
    const std::size_t np = opt.first_moments().size();
    if (c.aux.size() != 2 * np) throw DataFormatError("checkpoint lacks optimizer state");
    for (std::size_t k = 0; k < np; ++k) {
      opt.first_moments()[k] = c.aux[k];
      opt.second_moments()[k] = c.aux[np + k];
    }
    opt.set_steps_taken(c.step);
    r.start_step = c.step;
    if (r.start_step > cfg.steps) throw UsageError("checkpoint is past the requested step count");
    truncate_metrics(metrics_path, r.start_step);
  } else {
    save_checkpoint(ckpt_dir / ckpt_name(0), m, 0, m.config().seed, extra, optimizer_state(opt));
  }

  std::ofstream metrics;
  if (cfg.steps > r.start_step) {
    metrics.open(metrics_path, opts.resume ? std::ios::app : std::ios::trunc);
    if (!metrics) throw RuntimeError("cannot write " + metrics_path.string());
  }
  for (std::int64_t s = r.start_step; s < cfg.steps; ++s) {
    const Batch batch = sample_batch(data, cfg.batch_size, cfg.seed, s);
    const LossBreakdown l = train_step(m, opt, batch, cfg);
    metrics << metrics_record(s, l).dump() << '\n';
    metrics.flush();
    r.losses.push_back(l);
    if (opts.on_step) opts.on_step(s, l);
    const std::int64_t done = s + 1;
    if (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && done < cfg.steps) {
      save_checkpoint(ckpt_dir / ckpt_name(done), m, done, m.config().seed, extra, optimizer_state(opt));
    }
  }
  r.final_step = std::max(cfg.steps, r.start_step);
  r.final_checkpoint = opts.out_dir / "final.ckpt";
  if (cfg.steps > r.start_step || !opts.resume) {
    save_checkpoint(r.final_checkpoint, m, r.final_step, m.config().seed, extra, optimizer_state(opt));
    if (cfg.steps > 0) save_checkpoint(ckpt_dir / ckpt_name(r.final_step), m, r.final_step, m.config().seed, extra, optimizer_state(opt));
  }
  return r;
}

}  // namespace eqscene::train
