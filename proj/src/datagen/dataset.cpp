// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#include "eqscene/datagen/dataset.hpp"

#include <bit>
#include <cstdio>
#include <fstream>

#include "eqscene/datagen/named_colors.hpp"

namespace eqscene::datagen {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "dataset I/O assumes a little-endian host");

namespace {

std::string seq_filename(int id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "seq_%06d.bin", id);
  return buf;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DataFormatError("cannot open " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataFormatError("malformed JSON in " + p.string() + ": " + e.what());
  }
}

// Rebuilds background specs from the manifest and checks them against the stored pixels.
std::vector<BackgroundSpec> backgrounds_from(const nlohmann::json& j, const std::vector<float>& pixels,
                                             const DatasetConfig& cfg, Split split) {
  std::vector<BackgroundSpec> out;
  const std::size_t item = 3 * static_cast<std::size_t>(cfg.canvas) * cfg.canvas;
  const auto& specs = j.at("specs");
  if (specs.size() * item != pixels.size()) throw DataFormatError("backgrounds.bin does not match manifest");
  auto find_color = [](const std::string& name) {
    for (std::size_t k = 0; k < kNumNamedColors; ++k)
      if (name == named_colors()[k].name) return static_cast<int>(k);
    throw DataFormatError("unknown color name '" + name + "'");
  };
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const auto& s = specs[k];
    BackgroundSpec b;
    b.id = s.at("id").get<int>();
    b.split = split;
    b.base_index = find_color(s.at("base_color").get<std::string>());
    b.base = color_rgb(b.base_index);
    const auto& ds = s.at("diamonds");
    if (ds.size() != b.diamonds.size()) throw DataFormatError("background needs exactly five diamonds");
    for (std::size_t d = 0; d < ds.size(); ++d) {
      auto& dm = b.diamonds[d];
      dm.cx = ds[d].at("center").at(0).get<int>();
      dm.cy = ds[d].at("center").at(1).get<int>();
      dm.radius = ds[d].at("radius").get<int>();
      dm.color_index = find_color(ds[d].at("color").get<std::string>());
      dm.color = color_rgb(dm.color_index);
    }
    b.rendered = Tensor(Shape{1, 3, cfg.canvas, cfg.canvas},
                        std::vector<float>(pixels.begin() + static_cast<std::ptrdiff_t>(k * item),
                                           pixels.begin() + static_cast<std::ptrdiff_t>((k + 1) * item)));
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace

void write_f32(const fs::path& path, std::span<const float> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  if (!out) throw RuntimeError("write failed for " + path.string());
}

std::vector<float> read_f32(const fs::path& path, std::size_t expected_count) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw DataFormatError("cannot open " + path.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected_count * sizeof(float)) {
    throw DataFormatError(path.string() + ": expected " + std::to_string(expected_count * sizeof(float)) +
                          " bytes, found " + std::to_string(bytes));
  }
  in.seekg(0);
  std::vector<float> v(expected_count);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(bytes));
  return v;
}

std::string SequenceSource::fingerprint() const {
  return config().hash() + ":" + to_string(split()) + ":" + std::to_string(size());
}

// ----------------------------------------------------------------- manifest

nlohmann::json DatasetManifest::to_json(std::span<const BackgroundSpec> backgrounds) const {
  nlohmann::json specs = nlohmann::json::array();
  for (const auto& b : backgrounds) specs.push_back(datagen::to_json(b));
  nlohmann::json seqs = nlohmann::json::array();
  for (std::size_t k = 0; k < recipes.size(); ++k) {
    nlohmann::json r = datagen::to_json(recipes[k]);
    r["path"] = paths[k];
    seqs.push_back(std::move(r));
  }
  const int c = config.canvas;
  return {{"format_version", format_version},
          {"split", datagen::to_string(split)},
          {"num_sequences", num_sequences},
          {"config", config.to_json()},
          {"config_hash", config_hash},
          {"dtype", "float32-le"},
          {"sequence_layout", {{"frames", {config.frames, 3, c, c}}, {"alpha", {config.frames, 1, c, c}}}},
          {"backgrounds", {{"path", "backgrounds.bin"}, {"shape", {backgrounds.size(), 3, c, c}}, {"specs", specs}}},
          {"sequences", seqs}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
  try {
    DatasetManifest m;
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kDatasetFormatVersion) {
      throw DataFormatError("unsupported dataset format_version " + std::to_string(m.format_version));
    }
    m.split = split_from_string(j.at("split").get<std::string>());
    m.num_sequences = j.at("num_sequences").get<int>();
    m.config = DatasetConfig::from_json(j.at("config"));
    m.config_hash = j.at("config_hash").get<std::string>();
    if (m.config_hash != m.config.hash()) throw DataFormatError("manifest config_hash does not match its config");
    for (const auto& s : j.at("sequences")) {
      m.recipes.push_back(recipe_from_json(s));
      m.paths.push_back(s.at("path").get<std::string>());
    }
    if (static_cast<int>(m.recipes.size()) != m.num_sequences) {
      throw DataFormatError("manifest lists " + std::to_string(m.recipes.size()) + " sequences, header says " +
                            std::to_string(m.num_sequences));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataFormatError(std::string("malformed manifest: ") + e.what());
  }
}

// ------------------------------------------------------------- procedural

ProceduralDataset::ProceduralDataset(const DatasetConfig& cfg, Split split, std::vector<DigitSprite> sprites,
                                     int num_sequences)
    : cfg_(cfg), split_(split), sprites_(std::move(sprites)) {
  cfg_.validate();
  if (num_sequences < 0) throw ContractError("negative sequence count");
  backgrounds_ = gen_background_pool(cfg_, split_);
  recipes_.resize(static_cast<std::size_t>(num_sequences));
  if (num_sequences > 0 && sprites_.empty()) throw ContractError("no digits available for split " + to_string(split));
#pragma omp parallel for schedule(dynamic, 16)
  for (int id = 0; id < num_sequences; ++id) {
    recipes_[static_cast<std::size_t>(id)] = plan_sequence(id, split_, sprites_, cfg_);
  }
}

VideoSequence ProceduralDataset::sequence(int id) const {
  return render_sequence(recipe(id), sprites_, backgrounds_, cfg_);
}

std::pair<Tensor, Tensor> ProceduralDataset::frame_pair(int id, FramePair p) const {
  const SequenceRecipe& r = recipe(id);
  std::vector<const DigitSprite*> objs;
  std::vector<Pose> pi;
  std::vector<Pose> pj;
  for (const auto& o : r.objects) {
    objs.push_back(&sprites_[static_cast<std::size_t>(o.digit_index)]);
    pi.push_back(o.poses.at(static_cast<std::size_t>(p.i)));
    pj.push_back(o.poses.at(static_cast<std::size_t>(p.j)));
  }
  const auto& bg = backgrounds_.at(static_cast<std::size_t>(r.background_id));
  return {render_frame(objs, pi, bg).frame, render_frame(objs, pj, bg).frame};
}

// ------------------------------------------------------------------- disk

std::unique_ptr<DiskDataset> DiskDataset::open(const fs::path& root, Split split) {
  auto ds = std::unique_ptr<DiskDataset>(new DiskDataset());
  ds->dir_ = root / to_string(split);
  const nlohmann::json j = read_json(ds->dir_ / "manifest.json");
  ds->manifest_ = DatasetManifest::from_json(j);
  if (ds->manifest_.split != split) throw DataFormatError("manifest split does not match directory");
  const auto& cfg = ds->manifest_.config;
  const auto& bj = j.at("backgrounds");
  const std::size_t count = bj.at("specs").size();
  const auto pixels = read_f32(ds->dir_ / bj.at("path").get<std::string>(),
                               count * 3 * static_cast<std::size_t>(cfg.canvas) * cfg.canvas);
  ds->backgrounds_ = backgrounds_from(bj, pixels, cfg, split);
  return ds;
}

VideoSequence DiskDataset::sequence(int id) const {
  const auto& cfg = manifest_.config;
  const std::size_t plane = static_cast<std::size_t>(cfg.canvas) * cfg.canvas;
  const std::size_t nf = static_cast<std::size_t>(cfg.frames) * 3 * plane;
  const std::size_t na = static_cast<std::size_t>(cfg.frames) * plane;
  auto v = read_f32(dir_ / manifest_.paths.at(static_cast<std::size_t>(id)), nf + na);
  VideoSequence s;
  s.recipe = recipe(id);
  s.frames = Tensor(Shape{cfg.frames, 3, cfg.canvas, cfg.canvas}, std::vector<float>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(nf)));
  s.alpha = Tensor(Shape{cfg.frames, 1, cfg.canvas, cfg.canvas}, std::vector<float>(v.begin() + static_cast<std::ptrdiff_t>(nf), v.end()));
  return s;
}

std::pair<Tensor, Tensor> DiskDataset::frame_pair(int id, FramePair p) const {
  const auto& cfg = manifest_.config;
  if (p.i < 0 || p.j < 0 || p.i >= cfg.frames || p.j >= cfg.frames) throw ContractError("frame index out of range");
  const fs::path path = dir_ / manifest_.paths.at(static_cast<std::size_t>(id));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataFormatError("cannot open " + path.string());
  const Shape s{1, 3, cfg.canvas, cfg.canvas};
  auto read_frame = [&](int k) {
    Tensor t(s);
    in.seekg(static_cast<std::streamoff>(k * s.numel() * sizeof(float)));
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(s.numel() * sizeof(float)));
    if (!in) throw DataFormatError("truncated sequence file " + path.string());
    return t;
  };
  Tensor a = read_frame(p.i);
  Tensor b = read_frame(p.j);
  return {std::move(a), std::move(b)};
}

// ---------------------------------------------------------------- writing

DatasetManifest gen_split(const DatasetConfig& cfg, const std::vector<DigitSprite>& sprites, Split split,
                          int num_sequences, const fs::path& root) {
  cfg.validate();
  const fs::path dir = root / to_string(split);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw RuntimeError("cannot create " + dir.string() + ": " + ec.message());

  const auto backgrounds = gen_background_pool(cfg, split);
  std::vector<float> bg_pixels;
  for (const auto& b : backgrounds) bg_pixels.insert(bg_pixels.end(), b.rendered.storage().begin(), b.rendered.storage().end());
  write_f32(dir / "backgrounds.bin", bg_pixels);

  DatasetManifest m;
  m.split = split;
  m.num_sequences = num_sequences;
  m.config = cfg;
  m.config_hash = cfg.hash();
  m.recipes.resize(static_cast<std::size_t>(num_sequences));
  m.paths.resize(static_cast<std::size_t>(num_sequences));
  if (num_sequences > 0 && sprites.empty()) throw ContractError("no digits available for split " + to_string(split));

  std::string first_error;
#pragma omp parallel for schedule(dynamic, 8)
  for (int id = 0; id < num_sequences; ++id) {
    try {
      const auto k = static_cast<std::size_t>(id);
      m.recipes[k] = plan_sequence(id, split, sprites, cfg);
      m.paths[k] = seq_filename(id);
      const VideoSequence seq = render_sequence(m.recipes[k], sprites, backgrounds, cfg);
      std::vector<float> blob = seq.frames.storage();
      blob.insert(blob.end(), seq.alpha.storage().begin(), seq.alpha.storage().end());
      write_f32(dir / m.paths[k], blob);
    } catch (const std::exception& e) {
#pragma omp critical(gen_split_error)
      if (first_error.empty()) first_error = e.what();
    }
  }
  if (!first_error.empty()) throw RuntimeError(first_error);

  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw RuntimeError("cannot write manifest in " + dir.string());
  out << m.to_json(backgrounds).dump(1) << '\n';
  return m;
}

GeneratedDataset gen_dataset(const DatasetConfig& cfg, const MnistData& mnist, const fs::path& root,
                             int train_sequences, int test_sequences) {
  GeneratedDataset g;
  g.train = gen_split(cfg, mnist.train, Split::train, train_sequences, root);
  g.test = gen_split(cfg, mnist.test, Split::test, test_sequences, root);
  return g;
}

}  // namespace eqscene::datagen
