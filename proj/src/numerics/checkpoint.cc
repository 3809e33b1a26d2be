// Copyright 2026 The vqplan Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vqplan/numerics/checkpoint.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "vqplan/common/error.h"

namespace vqplan::numerics {
namespace {

constexpr char kMagic[8] = {'V', 'Q', 'P', 'L', 'A', 'N', 'C', 'K'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void WritePod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T ReadPod(std::ifstream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw ArtifactMismatch("truncated checkpoint " + path);
  }
  return v;
}

}  // namespace

void Checkpoint::AddArray(std::string name, std::vector<double> values) {
  if (HasArray(name)) throw ContractError("duplicate checkpoint array " + name);
  arrays_.emplace_back(std::move(name), std::move(values));
}

bool Checkpoint::HasArray(std::string_view name) const {
  for (const auto& [n, v] : arrays_) {
    if (n == name) return true;
  }
  return false;
}

const std::vector<double>& Checkpoint::Array(std::string_view name) const {
  for (const auto& [n, v] : arrays_) {
    if (n == name) return v;
  }
  throw ArtifactMismatch("checkpoint has no array '" + std::string(name) + "'");
}

void Checkpoint::Write(const std::string& path) const {
  nlohmann::json header = meta_;
  nlohmann::json list = nlohmann::json::array();
  for (const auto& [name, values] : arrays_) {
    list.push_back({{"name", name}, {"size", values.size()}});
  }
  header["arrays"] = list;
  const std::string text = header.dump();

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(kMagic, sizeof(kMagic));
    WritePod<std::uint32_t>(out, kFormatVersion);
    WritePod<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, values] : arrays_) {
      out.write(reinterpret_cast<const char*>(values.data()),
                static_cast<std::streamsize>(values.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("cannot rename " + tmp + " to " + path);
  }
}

Checkpoint Checkpoint::Read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactMismatch("cannot open checkpoint " + path);
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ArtifactMismatch(path + " is not a checkpoint");
  }
  const auto version = ReadPod<std::uint32_t>(in, path);
  if (version != kFormatVersion) {
    throw ArtifactMismatch("checkpoint " + path + " has format version " +
                           std::to_string(version));
  }
  const auto length = ReadPod<std::uint64_t>(in, path);
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length))) {
    throw ArtifactMismatch("truncated checkpoint " + path);
  }
  Checkpoint ckpt;
  ckpt.meta_ = nlohmann::json::parse(text);
  const nlohmann::json list = ckpt.meta_.at("arrays");
  ckpt.meta_.erase("arrays");
  for (const auto& entry : list) {
    std::vector<double> values(entry.at("size").get<std::size_t>());
    if (!in.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(double)))) {
      throw ArtifactMismatch("truncated checkpoint " + path);
    }
    ckpt.arrays_.emplace_back(entry.at("name").get<std::string>(), std::move(values));
  }
  return ckpt;
}

void StoreParams(Checkpoint& ckpt, const ParamStore& params,
                 const std::string& prefix) {
  nlohmann::json list = nlohmann::json::array();
  for (const Parameter& p : params.parameters()) {
    list.push_back({{"name", p.name}, {"shape", p.tensor.shape()}});
    auto v = p.tensor.values();
    ckpt.AddArray(prefix + ":" + p.name, {v.begin(), v.end()});
    ckpt.AddArray(prefix + ":" + p.name + "#m", p.first_moment);
    ckpt.AddArray(prefix + ":" + p.name + "#v", p.second_moment);
  }
  ckpt.meta()["params"][prefix] = {{"list", list}, {"step", params.step()}};
}

void LoadParams(const Checkpoint& ckpt, ParamStore& params,
                const std::string& prefix) {
  const auto& meta = ckpt.meta();
  if (!meta.contains("params") || !meta["params"].contains(prefix)) {
    throw ArtifactMismatch("checkpoint has no parameter group '" + prefix + "'");
  }
  const auto& group = meta["params"][prefix];
  const auto& list = group.at("list");
  if (static_cast<int>(list.size()) != params.size()) {
    throw ArtifactMismatch("parameter group '" + prefix + "' holds " +
                           std::to_string(list.size()) + " tensors, model has " +
                           std::to_string(params.size()));
  }
  for (int i = 0; i < params.size(); ++i) {
    Parameter& p = params.at(i);
    const std::string name = list[i].at("name").get<std::string>();
    const auto shape = list[i].at("shape").get<std::vector<int>>();
    if (name != p.name || shape != p.tensor.shape()) {
      throw ArtifactMismatch("parameter " + std::to_string(i) + " of '" + prefix +
                             "' is " + name + ", model expects " + p.name);
    }
    const auto& v = ckpt.Array(prefix + ":" + name);
    std::copy(v.begin(), v.end(), p.tensor.mutable_values().begin());
    p.first_moment = ckpt.Array(prefix + ":" + name + "#m");
    p.second_moment = ckpt.Array(prefix + ":" + name + "#v");
  }
  params.set_step(group.at("step").get<std::int64_t>());
}

}  // namespace vqplan::numerics
