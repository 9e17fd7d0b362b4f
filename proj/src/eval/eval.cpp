// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#include "eqscene/eval/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "eqscene/train/losses.hpp"

namespace eqscene::eval {

namespace fs = std::filesystem;
using datagen::Pose;
using datagen::TrajectoryStep;

double mse(const Tensor& a, const Tensor& b) { return train::mean_squared_error(a, b); }

double psnr_from_mse(double m) {
  if (m < 0.0) throw ContractError("negative MSE");
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(m);
}

double psnr(const Tensor& a, const Tensor& b) { return psnr_from_mse(mse(a, b)); }

// ----------------------------------------------------------------- pairs

Pose replay_steps(const Pose& start, std::span<const TrajectoryStep> steps, int i, int j) {
  const int m = static_cast<int>(steps.size()) + 1;
  if (i < 0 || j < 0 || i >= m || j >= m) throw ContractError("replay_steps: frame index out of range");
  Pose p = start;
  for (int k = i; k < j; ++k) p = datagen::advance(p, steps[static_cast<std::size_t>(k)]);
  for (int k = i - 1; k >= j; --k) p = datagen::retreat(p, steps[static_cast<std::size_t>(k)]);
  return p;
}

EvalPair make_eval_pair(Rng& rng, const datagen::DatasetConfig& cfg,
                        std::span<const datagen::BackgroundSpec> backgrounds,
                        std::span<const datagen::DigitSprite> digits) {
  if (digits.size() < 2 || backgrounds.size() < 2) throw ContractError("eval pairs need two digits and two backgrounds");
  constexpr int kMaxAttempts = 100;
  for (int attempt = 1; attempt <= kMaxAttempts; ++attempt) {
    const int d1 = static_cast<int>(rng.below(digits.size()));
    int d2 = static_cast<int>(rng.below(digits.size() - 1));
    if (d2 >= d1) ++d2;
    const int b1 = static_cast<int>(rng.below(backgrounds.size()));
    int b2 = static_cast<int>(rng.below(backgrounds.size() - 1));
    if (b2 >= b1) ++b2;

    auto make_recipe = [&](int d, int b) {
      datagen::SequenceRecipe r;
      r.split = digits[static_cast<std::size_t>(d)].split;
      r.seed = rng.counter();
      r.background_id = b;
      r.objects.push_back(datagen::plan_track(digits[static_cast<std::size_t>(d)], d, rng, cfg, cfg.seed));
      return r;
    };
    const auto r1 = make_recipe(d1, b1);
    const auto r2 = make_recipe(d2, b2);
    const auto fp = datagen::sample_frame_indices(rng, cfg.frames);

    const auto& sprite2 = digits[static_cast<std::size_t>(d2)];
    const Pose moved = replay_steps(r2.objects[0].poses[static_cast<std::size_t>(fp.i)], r1.objects[0].steps, fp.i, fp.j);
    if (!datagen::fits_canvas(sprite2, moved, cfg.canvas, cfg.alpha_min)) continue;

    EvalPair p;
    p.seq1 = datagen::render_sequence(r1, digits, backgrounds, cfg);
    p.seq2 = datagen::render_sequence(r2, digits, backgrounds, cfg);
    p.indices = fp;
    const auto& bg2 = backgrounds[static_cast<std::size_t>(b2)];
    p.background_target =
        datagen::render_frame(digits[static_cast<std::size_t>(d1)], r1.objects[0].poses[static_cast<std::size_t>(fp.j)], bg2).frame;
    p.transform_target = datagen::render_frame(sprite2, moved, bg2).frame;
    p.background2 = bg2.rendered;
    p.attempts = attempt;
    return p;
  }
  throw RuntimeError("no valid eval pair after " + std::to_string(kMaxAttempts) + " attempts");
}

std::vector<EvalPair> make_eval_set(int n, std::uint64_t seed, const datagen::DatasetConfig& cfg,
                                    std::span<const datagen::BackgroundSpec> backgrounds,
                                    std::span<const datagen::DigitSprite> digits) {
  if (n < 1) throw UsageError("eval set size must be positive");
  std::vector<EvalPair> pairs(static_cast<std::size_t>(n));
  std::string first_error;
#pragma omp parallel for schedule(dynamic, 8)
  for (int k = 0; k < n; ++k) {
    try {
      Rng rng = Rng::derive(seed, {0x6576ULL, static_cast<std::uint64_t>(k)});
      pairs[static_cast<std::size_t>(k)] = make_eval_pair(rng, cfg, backgrounds, digits);
    } catch (const std::exception& e) {
#pragma omp critical(eval_set_error)
      if (first_error.empty()) first_error = e.what();
    }
  }
  if (!first_error.empty()) throw RuntimeError(first_error);
  return pairs;
}

// ------------------------------------------------------------- summaries

MeanCI mean_ci(std::span<const double> v) {
  MeanCI r;
  r.n = static_cast<int>(v.size());
  if (v.empty()) return r;
  double sum = 0.0;
  for (double x : v) sum += x;
  r.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    r.half_width = 1.96 * sd / std::sqrt(static_cast<double>(v.size()));
  }
  return r;
}

MetricSummary summarize(std::string name, std::vector<double> mse_values) {
  if (mse_values.empty()) throw ContractError("metric '" + name + "' has no examples");
  MetricSummary s;
  s.name = std::move(name);
  s.mse = std::move(mse_values);
  s.count = static_cast<int>(s.mse.size());
  std::vector<double> finite;
  for (double m : s.mse) {
    const double p = psnr_from_mse(m);
    s.psnr.push_back(p);
    if (std::isinf(p)) {
      ++s.infinite_psnr;
    } else {
      finite.push_back(p);
    }
  }
  const auto m = mean_ci(s.mse);
  s.mean_mse = m.mean;
  s.ci_mse = m.half_width;
  const auto p = mean_ci(finite);
  s.mean_psnr = p.mean;
  s.ci_psnr = p.half_width;
  return s;
}

namespace {

void require_pairs(std::span<const EvalPair> pairs) {
  if (pairs.empty()) throw ContractError("evaluation needs at least one pair");
}

// Stacks one frame per pair into a batch.
template <typename Fn>
Tensor gather(std::span<const EvalPair> pairs, std::size_t begin, std::size_t end, Fn frame_of) {
  std::vector<Tensor> frames;
  for (std::size_t k = begin; k < end; ++k) frames.push_back(frame_of(pairs[k]));
  std::vector<const Tensor*> ptrs;
  for (const auto& f : frames) ptrs.push_back(&f);
  return concat_batch<float>(std::span<const Tensor* const>(ptrs));
}

enum class Manip { background, transform };

MetricSummary eval_manip(const model::SceneModel& m, std::span<const EvalPair> pairs, int batch, Manip kind) {
  require_pairs(pairs);
  if (batch < 1) throw ContractError("eval batch must be positive");
  std::vector<double> out;
  for (std::size_t begin = 0; begin < pairs.size(); begin += static_cast<std::size_t>(batch)) {
    const std::size_t end = std::min(pairs.size(), begin + static_cast<std::size_t>(batch));
    const Tensor x1i = gather(pairs, begin, end, [](const EvalPair& p) { return p.seq1.frame(p.indices.i); });
    const Tensor x1j = gather(pairs, begin, end, [](const EvalPair& p) { return p.seq1.frame(p.indices.j); });
    const Tensor x2i = gather(pairs, begin, end, [](const EvalPair& p) { return p.seq2.frame(p.indices.i); });
    const Tensor pred = kind == Manip::background ? m.compose_h(x1i, x1j, x1i, x2i) : m.compose_h(x1i, x1j, x2i, x2i);
    for (std::size_t k = begin; k < end; ++k) {
      const Tensor& target = kind == Manip::background ? pairs[k].background_target : pairs[k].transform_target;
      out.push_back(mse(slice_batch(pred, static_cast<int>(k - begin), 1), target));
    }
  }
  return summarize(kind == Manip::background ? "background_manipulation" : "transform_manipulation", std::move(out));
}

}  // namespace

MetricSummary eval_background_manip(const model::SceneModel& m, std::span<const EvalPair> pairs, int batch) {
  return eval_manip(m, pairs, batch, Manip::background);
}

MetricSummary eval_transform_manip(const model::SceneModel& m, std::span<const EvalPair> pairs, int batch) {
  return eval_manip(m, pairs, batch, Manip::transform);
}

MetricSummary baseline_video_frames(std::span<const EvalPair> pairs) {
  require_pairs(pairs);
  std::vector<double> out;
  for (const auto& p : pairs) out.push_back(mse(p.seq1.frame(p.indices.i), p.seq1.frame(p.indices.j)));
  return summarize("video_frames_baseline", std::move(out));
}

MetricSummary baseline_no_object(std::span<const EvalPair> pairs) {
  require_pairs(pairs);
  std::vector<double> out;
  for (const auto& p : pairs) out.push_back(mse(p.background2, p.background_target));
  return summarize("no_object_baseline", std::move(out));
}

// ------------------------------------------------------------ transforms

nlohmann::json TransformStats::to_json() const {
  auto mat = [](const std::array<double, 6>& a) {
    return nlohmann::json{{a[0], a[1], a[2]}, {a[3], a[4], a[5]}};
  };
  nlohmann::json j{{"frame", warp::to_string(frame)}, {"count", count}, {"mean", mat(mean)},
                   {"max", mat(max)},                 {"min", mat(min)},  {"max_abs", mat(max_abs)}};
  if (has_displacement) {
    j["center_displacement"] = {{"mean", displacement_mean}, {"max_abs", displacement_max_abs}};
  }
  return j;
}

TransformStats accumulate_stats(std::span<const warp::AffineParams> transforms) {
  if (transforms.empty()) throw ContractError("transform statistics need at least one transform");
  TransformStats s;
  s.frame = transforms.front().frame;
  s.count = static_cast<int>(transforms.size());
  s.max.fill(-std::numeric_limits<double>::infinity());
  s.min.fill(std::numeric_limits<double>::infinity());
  std::array<double, 6> sum{};
  for (const auto& t : transforms) {
    if (t.frame != s.frame) throw ContractError("transform statistics over mixed frames");
    const auto c = t.coefficients();
    for (int k = 0; k < 6; ++k) {
      sum[k] += c[k];
      s.max[k] = std::max(s.max[k], c[k]);
      s.min[k] = std::min(s.min[k], c[k]);
      s.max_abs[k] = std::max(s.max_abs[k], std::abs(c[k]));
    }
  }
  for (int k = 0; k < 6; ++k) s.mean[k] = sum[k] / s.count;
  return s;
}

TransformSource transform_source_from_string(const std::string& s) {
  if (s == "gt" || s == "ground_truth") return TransformSource::ground_truth;
  if (s == "learned") return TransformSource::learned;
  throw UsageError("unknown transform source '" + s + "'");
}

TransformStats analyze_transform_stats(TransformSource source, const model::SceneModel* m, int n_pairs,
                                       std::uint64_t seed, const datagen::DatasetConfig& cfg,
                                       std::span<const datagen::DigitSprite> digits, datagen::Split split) {
  if (n_pairs < 1) throw UsageError("transform statistics need at least one pair");
  if (source == TransformSource::learned && m == nullptr) throw UsageError("learned statistics need a checkpoint");
  std::vector<datagen::SequenceRecipe> recipes(static_cast<std::size_t>(n_pairs));
  std::vector<datagen::FramePair> idx(static_cast<std::size_t>(n_pairs));
#pragma omp parallel for schedule(dynamic, 64)
  for (int k = 0; k < n_pairs; ++k) {
    recipes[static_cast<std::size_t>(k)] = datagen::plan_sequence(k, split, digits, cfg);
    Rng rng = Rng::derive(seed, {0x7473ULL, static_cast<std::uint64_t>(k)});
    idx[static_cast<std::size_t>(k)] = datagen::sample_frame_indices(rng, cfg.frames);
  }
  std::vector<warp::AffineParams> t;
  t.reserve(static_cast<std::size_t>(n_pairs));
  if (source == TransformSource::ground_truth) {
    std::array<double, 2> sum{};
    std::array<double, 2> peak{};
    for (int k = 0; k < n_pairs; ++k) {
      const auto& r = recipes[static_cast<std::size_t>(k)];
      const auto& p = idx[static_cast<std::size_t>(k)];
      t.push_back(datagen::ground_truth_affine(r, p.i, p.j));
      const auto& c = r.objects[0].poses[static_cast<std::size_t>(p.i)];
      const auto moved = t.back().apply({c.x, c.y});
      const std::array<double, 2> d{moved.x - c.x, moved.y - c.y};
      for (int a = 0; a < 2; ++a) {
        sum[a] += d[a];
        peak[a] = std::max(peak[a], std::abs(d[a]));
      }
    }
    auto s = accumulate_stats(t);
    s.has_displacement = true;
    s.displacement_mean = {sum[0] / n_pairs, sum[1] / n_pairs};
    s.displacement_max_abs = peak;
    return s;
  }
  const auto backgrounds = datagen::gen_background_pool(cfg, split);
  constexpr int kBatch = 64;
  for (int begin = 0; begin < n_pairs; begin += kBatch) {
    const int end = std::min(n_pairs, begin + kBatch);
    Tensor x1(Shape{end - begin, 3, cfg.canvas, cfg.canvas});
    Tensor x2(x1.shape());
#pragma omp parallel for
    for (int k = begin; k < end; ++k) {
      const auto& r = recipes[static_cast<std::size_t>(k)];
      const auto& sprite = digits[static_cast<std::size_t>(r.objects[0].digit_index)];
      const auto& bg = backgrounds[static_cast<std::size_t>(r.background_id)];
      const auto& p = idx[static_cast<std::size_t>(k)];
      const Tensor f1 = datagen::render_frame(sprite, r.objects[0].poses[static_cast<std::size_t>(p.i)], bg).frame;
      const Tensor f2 = datagen::render_frame(sprite, r.objects[0].poses[static_cast<std::size_t>(p.j)], bg).frame;
      std::copy(f1.storage().begin(), f1.storage().end(), x1.item(k - begin).begin());
      std::copy(f2.storage().begin(), f2.storage().end(), x2.item(k - begin).begin());
    }
    const auto pred = m->predict_transform(m->encode_object(x1), m->encode_object(x2));
    t.insert(t.end(), pred.begin(), pred.end());
  }
  return accumulate_stats(t);
}

// ---------------------------------------------------------------- report

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw ContractError("quantile of an empty set");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

BoxStats box_stats(std::span<const double> v) {
  const std::vector<double> vals(v.begin(), v.end());
  BoxStats b;
  b.q1 = quantile(vals, 0.25);
  b.median = quantile(vals, 0.5);
  b.q3 = quantile(vals, 0.75);
  const double iqr = b.q3 - b.q1;
  const double lo = b.q1 - 1.5 * iqr;
  const double hi = b.q3 + 1.5 * iqr;
  b.whisker_low = b.q1;
  b.whisker_high = b.q3;
  for (double x : vals) {
    if (x < lo || x > hi) {
      ++b.outliers;
      continue;
    }
    b.whisker_low = std::min(b.whisker_low, x);
    b.whisker_high = std::max(b.whisker_high, x);
  }
  return b;
}

namespace {

std::string fmt(double v, int digits) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

std::string boxplot_svg(std::span<const MetricSummary> s) {
  const double width = 140.0 * static_cast<double>(s.size()) + 80.0;
  const double height = 360.0;
  const double top = 20.0, bottom = 300.0, left = 60.0;
  std::vector<BoxStats> boxes;
  double ymax = 0.0;
  for (const auto& m : s) {
    boxes.push_back(box_stats(m.mse));
    ymax = std::max(ymax, boxes.back().whisker_high);
  }
  ymax = ymax > 0.0 ? ymax * 1.1 : 1.0;
  auto y = [&](double v) { return bottom - (bottom - top) * v / ymax; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << bottom
     << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = ymax * t / 4.0;
    os << "<text x=\"" << left - 6 << "\" y=\"" << y(v) + 4 << "\" text-anchor=\"end\">" << fmt(v, 3) << "</text>\n";
  }
  os << "<text x=\"14\" y=\"" << (top + bottom) / 2 << "\" transform=\"rotate(-90 14 " << (top + bottom) / 2
     << ")\" text-anchor=\"middle\">MSE</text>\n";
  for (std::size_t k = 0; k < s.size(); ++k) {
    const auto& b = boxes[k];
    const double cx = left + 70.0 + 140.0 * static_cast<double>(k);
    os << "<line x1=\"" << cx << "\" y1=\"" << y(b.whisker_low) << "\" x2=\"" << cx << "\" y2=\"" << y(b.q1)
       << "\" stroke=\"black\"/>\n"
       << "<line x1=\"" << cx << "\" y1=\"" << y(b.q3) << "\" x2=\"" << cx << "\" y2=\"" << y(b.whisker_high)
       << "\" stroke=\"black\"/>\n";
    for (double w : {b.whisker_low, b.whisker_high}) {
      os << "<line x1=\"" << cx - 15 << "\" y1=\"" << y(w) << "\" x2=\"" << cx + 15 << "\" y2=\"" << y(w)
         << "\" stroke=\"black\"/>\n";
    }
    os << "<rect x=\"" << cx - 30 << "\" y=\"" << y(b.q3) << "\" width=\"60\" height=\"" << y(b.q1) - y(b.q3)
       << "\" fill=\"#9ecae1\" stroke=\"black\"/>\n"
       << "<line x1=\"" << cx - 30 << "\" y1=\"" << y(b.median) << "\" x2=\"" << cx + 30 << "\" y2=\""
       << y(b.median) << "\" stroke=\"#d62728\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << cx << "\" y=\"" << bottom + 18 << "\" text-anchor=\"middle\">" << s[k].name << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace

void emit_report(std::span<const MetricSummary> summaries, const fs::path& out_dir) {
  if (summaries.empty()) throw ContractError("report needs at least one metric");
  fs::create_directories(out_dir);
  nlohmann::json stats = nlohmann::json::object();
  std::ostringstream table;
  table << "| Metric | PSNR (dB) | PSNR 95% CI | MSE | MSE 95% CI | n | infinite PSNR |\n"
        << "|---|---|---|---|---|---|---|\n";
  for (const auto& s : summaries) {
    const auto b = box_stats(s.mse);
    stats[s.name] = {{"count", s.count},
                     {"mse",
                      {{"mean", s.mean_mse},
                       {"ci95", s.ci_mse},
                       {"q1", b.q1},
                       {"median", b.median},
                       {"q3", b.q3},
                       {"whisker_low", b.whisker_low},
                       {"whisker_high", b.whisker_high},
                       {"outliers", b.outliers}}},
                     {"psnr", {{"mean", s.mean_psnr}, {"ci95", s.ci_psnr}, {"infinite_excluded", s.infinite_psnr}}}};
    table << "| " << s.name << " | " << fmt(s.mean_psnr, 3) << " | " << fmt(s.ci_psnr, 3) << " | "
          << fmt(s.mean_mse, 5) << " | " << fmt(s.ci_mse, 5) << " | " << s.count << " | " << s.infinite_psnr
          << " |\n";
  }
  std::ofstream(out_dir / "stats.json") << stats.dump(2) << '\n';
  std::ofstream(out_dir / "mse_boxplot.svg") << boxplot_svg(summaries);
  std::ofstream(out_dir / "psnr_table.md") << table.str();
  if (!fs::exists(out_dir / "psnr_table.md")) throw RuntimeError("cannot write report in " + out_dir.string());
}

}  // namespace eqscene::eval
