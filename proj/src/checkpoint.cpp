// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#include "lipspeech/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

#include "lipspeech/error.hpp"

namespace lipspeech {

static_assert(std::endian::native == std::endian::little, "archive payloads are little-endian");

namespace {

constexpr char kMagic[8] = {'F', 'L', 'T', 'S', 'C', 'K', 'P', 'T'};
constexpr int kFormat = 1;

}  // namespace

const Tensor* Archive::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void Archive::append(const std::string& prefix, const nn::NamedTensors& src) {
  for (const auto& [name, t] : src) tensors.emplace_back(prefix + name, Tensor(t.shape(), t.values()));
}

void save_archive(const std::filesystem::path& path, const Archive& archive) {
  nlohmann::json header;
  header["format"] = kFormat;
  header["step"] = archive.step;
  header["stage"] = archive.stage;
  header["config"] = archive.config_json;
  header["meta"] = archive.meta;
  nlohmann::json entries = nlohmann::json::array();
  Index offset = 0;
  for (const auto& [name, t] : archive.tensors) {
    entries.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.numel();
  }
  header["entries"] = std::move(entries);
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    const std::uint64_t len = text.size();
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : archive.tensors)
      out.write(reinterpret_cast<const char*>(t.values().data()), static_cast<std::streamsize>(t.numel() * 8));
    if (!out) throw InputError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Archive load_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open archive " + path.string());
  char magic[8];
  std::uint64_t len = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw InputError(path.string() + " is not a tensor archive");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw InputError(path.string() + ": truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": corrupt header: " + e.what());
  }
  if (header.value("format", 0) != kFormat) throw InputError(path.string() + ": unsupported archive format");

  Archive a;
  a.step = header.at("step").get<Index>();
  a.stage = header.at("stage").get<int>();
  a.config_json = header.at("config").get<std::string>();
  a.meta = header.at("meta").get<std::map<std::string, std::string>>();
  Index expected = 0;
  for (const auto& e : header.at("entries")) {
    const Shape shape = e.at("shape").get<Shape>();
    if (e.at("offset").get<Index>() != expected) throw InputError(path.string() + ": non-contiguous entry table");
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.values().data()), static_cast<std::streamsize>(t.numel() * 8));
    if (!in) throw InputError(path.string() + ": truncated payload at " + e.at("name").get<std::string>());
    expected += t.numel();
    a.tensors.emplace_back(e.at("name").get<std::string>(), std::move(t));
  }
  return a;
}

void restore(const nn::NamedTensors& dst, const Archive& archive, const std::string& prefix) {
  std::vector<std::string> problems;
  std::set<std::string> wanted;
  for (const auto& [name, t] : dst) {
    wanted.insert(prefix + name);
    const Tensor* src = archive.find(prefix + name);
    if (!src)
      problems.push_back("missing " + prefix + name);
    else if (src->shape() != t.shape())
      problems.push_back("shape of " + prefix + name + " is " + shape_str(src->shape()) + ", expected " +
                         shape_str(t.shape()));
  }
  for (const auto& [name, t] : archive.tensors)
    if (name.compare(0, prefix.size(), prefix) == 0 && !wanted.count(name)) problems.push_back("unexpected " + name);
  if (!problems.empty()) {
    std::string msg = "checkpoint does not match the model:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
  for (const auto& [name, t] : dst) {
    Tensor target = t;
    target.values() = archive.find(prefix + name)->values();
  }
}

std::uint64_t tensor_hash(const nn::NamedTensors& tensors) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [name, t] : tensors) {
    mix(name.data(), name.size());
    mix(t.shape().data(), t.shape().size() * sizeof(Index));
    mix(t.values().data(), t.values().size() * sizeof(double));
  }
  return h;
}

}  // namespace lipspeech
