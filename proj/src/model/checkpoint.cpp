// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#include "eqscene/model/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <memory>

namespace eqscene::model {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic{'E', 'Q', 'S', 'C', 'K', 'P', 'T', '\0'};

nlohmann::json shape_json(const Shape& s) { return {s.n, s.c, s.h, s.w}; }

Shape shape_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw DataFormatError("checkpoint shape must have four entries");
  Shape s{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
  if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) throw DataFormatError("negative checkpoint shape");
  return s;
}

void write_tensor(std::ofstream& out, const Tensor& t) {
  out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
}

}  // namespace

void save_checkpoint(const fs::path& path, const SceneModel& model, std::int64_t step, std::uint64_t seed,
                     const nlohmann::json& extra, std::span<const Tensor> aux) {
  const auto params = model.parameters();
  nlohmann::json plist = nlohmann::json::array();
  for (const auto* p : params) plist.push_back({{"name", p->name}, {"shape", shape_json(p->value.shape())}});
  nlohmann::json alist = nlohmann::json::array();
  for (const auto& t : aux) alist.push_back(shape_json(t.shape()));
  const nlohmann::json header{{"format_version", kCheckpointFormatVersion},
                              {"config_hash", model.config().hash()},
                              {"step", step},
                              {"seed", seed},
                              {"model_config", model.config().to_json()},
                              {"extra", extra},
                              {"params", plist},
                              {"aux", alist}};
  const std::string text = header.dump();

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeError("cannot write checkpoint " + tmp.string());
    out.write(kMagic.data(), kMagic.size());
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto* p : params) write_tensor(out, p->value);
    for (const auto& t : aux) write_tensor(out, t);
    if (!out) throw RuntimeError("write failed for checkpoint " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint read_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw DataFormatError(path.string() + " is not a checkpoint file");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > (1u << 28)) throw DataFormatError("bad checkpoint header length in " + path.string());
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataFormatError("truncated checkpoint header in " + path.string());

  Checkpoint c;
  try {
    const auto h = nlohmann::json::parse(text);
    c.format_version = h.at("format_version").get<int>();
    if (c.format_version != kCheckpointFormatVersion) {
      throw DataFormatError("unsupported checkpoint format_version " + std::to_string(c.format_version));
    }
    c.config_hash = h.at("config_hash").get<std::string>();
    c.step = h.at("step").get<std::int64_t>();
    c.seed = h.at("seed").get<std::uint64_t>();
    c.model = ModelConfig::from_json(h.at("model_config"));
    c.extra = h.at("extra");
    if (c.model.hash() != c.config_hash) throw DataFormatError("checkpoint config_hash does not match its config");
    auto read_block = [&](const Shape& s) {
      Tensor t(s);
      in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
      if (!in) throw DataFormatError("truncated checkpoint payload in " + path.string());
      return t;
    };
    for (const auto& p : h.at("params")) {
      c.param_names.push_back(p.at("name").get<std::string>());
      c.params.push_back(read_block(shape_from(p.at("shape"))));
    }
    for (const auto& a : h.at("aux")) c.aux.push_back(read_block(shape_from(a)));
  } catch (const nlohmann::json::exception& e) {
    throw DataFormatError("malformed checkpoint header in " + path.string() + ": " + e.what());
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataFormatError("trailing bytes in checkpoint " + path.string());
  return c;
}

void load_parameters(SceneModel& model, const Checkpoint& ckpt) {
  if (ckpt.config_hash != model.config().hash()) {
    throw RuntimeError("checkpoint architecture " + ckpt.config_hash + " does not match model " + model.config().hash());
  }
  auto params = model.parameters();
  if (params.size() != ckpt.params.size()) throw DataFormatError("checkpoint parameter count mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k]->name != ckpt.param_names[k]) {
      throw DataFormatError("checkpoint parameter '" + ckpt.param_names[k] + "' where '" + params[k]->name + "' expected");
    }
    require_shape(ckpt.params[k].shape(), params[k]->value.shape(), params[k]->name.c_str());
    params[k]->value = ckpt.params[k];
  }
}

std::unique_ptr<SceneModel> load_model(const fs::path& path) {
  const Checkpoint c = read_checkpoint(path);
  ModelConfig cfg = c.model;
  cfg.seed = c.seed;
  auto m = std::make_unique<SceneModel>(cfg);
  load_parameters(*m, c);
  return m;
}

}  // namespace eqscene::model
