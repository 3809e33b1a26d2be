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

#include "vqplan/vq/codebook.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vqplan/common/error.h"
#include "vqplan/kernels/kernels.h"
#include "vqplan/numerics/tensor.h"

namespace vqplan::vq {
namespace {

void RequireBatch(std::span<const double> batch, int dim, const char* op) {
  if (batch.empty() || batch.size() % dim != 0) {
    throw DimensionError(std::string(op) + ": batch is empty or not a multiple of D=" +
                         std::to_string(dim));
  }
}

}  // namespace

Codebook::Codebook(int num_codes, int dim, double decay, double epsilon)
    : num_codes_(num_codes),
      dim_(dim),
      decay_(decay),
      epsilon_(epsilon),
      embeddings_(static_cast<std::size_t>(num_codes) * dim, 0.0),
      counts_(num_codes, 0.0),
      sums_(static_cast<std::size_t>(num_codes) * dim, 0.0) {
  if (num_codes < 2) throw ContractError("codebook needs K >= 2");
  if (dim < 1) throw ContractError("codebook needs D >= 1");
  if (!(decay > 0.0 && decay < 1.0)) throw ContractError("codebook decay must be in (0,1)");
  if (epsilon < 0.0) throw ContractError("codebook epsilon must be >= 0");
}

std::span<const double> Codebook::embedding(int k) const {
  if (k < 0 || k >= num_codes_) {
    throw ContractError("code index " + std::to_string(k) + " outside [0," +
                        std::to_string(num_codes_) + ")");
  }
  return std::span<const double>(embeddings_).subspan(static_cast<std::size_t>(k) * dim_, dim_);
}

void Codebook::SetEmbeddings(std::vector<double> flat) {
  if (flat.size() != embeddings_.size()) throw DimensionError("codebook: embedding size");
  numerics::CheckFinite(flat, "codebook embeddings");
  embeddings_ = std::move(flat);
  std::fill(counts_.begin(), counts_.end(), 0.0);
  std::fill(sums_.begin(), sums_.end(), 0.0);
}

void Codebook::SetState(std::vector<double> embeddings, std::vector<double> counts,
                        std::vector<double> sums) {
  if (embeddings.size() != embeddings_.size() || counts.size() != counts_.size() ||
      sums.size() != sums_.size()) {
    throw DimensionError("codebook: state size");
  }
  numerics::CheckFinite(embeddings, "codebook embeddings");
  embeddings_ = std::move(embeddings);
  counts_ = std::move(counts);
  sums_ = std::move(sums);
}

void Codebook::InitFromBatch(std::span<const double> batch, Rng& rng) {
  RequireBatch(batch, dim_, "codebook init");
  const int n = static_cast<int>(batch.size() / dim_);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  auto row = [&](int i) { return batch.subspan(static_cast<std::size_t>(i) * dim_, dim_); };
  std::vector<int> picked;
  for (int i : order) {
    if (static_cast<int>(picked.size()) == num_codes_) break;
    bool duplicate = false;
    for (int j : picked) {
      if (std::equal(row(i).begin(), row(i).end(), row(j).begin())) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) picked.push_back(i);
  }
  for (int k = 0; k < num_codes_; ++k) {
    const bool jitter = k >= static_cast<int>(picked.size());
    auto src = row(picked[k % picked.size()]);
    for (int d = 0; d < dim_; ++d) {
      double v = src[d];
      if (jitter) v += 1e-3 * rng.Normal();
      embeddings_[static_cast<std::size_t>(k) * dim_ + d] = v;
      sums_[static_cast<std::size_t>(k) * dim_ + d] = v;
    }
    counts_[k] = 1.0;
  }
}

int Codebook::Nearest(std::span<const double> z) const {
  if (static_cast<int>(z.size()) != dim_) {
    throw DimensionError("quantize: input width " + std::to_string(z.size()) +
                         ", codebook D=" + std::to_string(dim_));
  }
  numerics::CheckFinite(z, "quantize input");
  std::vector<double> dist(num_codes_);
  kernels::Active().squared_distances(z.data(), embeddings_.data(), num_codes_, dim_,
                                      dist.data());
  int best = 0;
  for (int k = 1; k < num_codes_; ++k) {
    if (dist[k] < dist[best]) best = k;
  }
  return best;
}

QuantizeResult Codebook::Quantize(std::span<const double> z) const {
  QuantizeResult r;
  r.index = Nearest(z);
  auto e = embedding(r.index);
  r.embedding.assign(e.begin(), e.end());
  r.z_u.assign(z.begin(), z.end());
  for (int d = 0; d < dim_; ++d) {
    const double diff = z[d] - e[d];
    r.commitment += diff * diff;
  }
  return r;
}

std::vector<int> Codebook::NearestBatch(std::span<const double> batch) const {
  RequireBatch(batch, dim_, "quantize");
  const std::size_t n = batch.size() / dim_;
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = Nearest(batch.subspan(i * dim_, dim_));
  return out;
}

void Codebook::EmaUpdate(std::span<const int> indices, std::span<const double> batch) {
  RequireBatch(batch, dim_, "ema update");
  if (indices.size() * dim_ != batch.size()) {
    throw DimensionError("ema update: one index per batch row required");
  }
  std::vector<double> count(num_codes_, 0.0);
  std::vector<double> sum(sums_.size(), 0.0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int k = indices[i];
    if (k < 0 || k >= num_codes_) throw ContractError("ema update: index out of range");
    count[k] += 1.0;
    for (int d = 0; d < dim_; ++d) {
      sum[static_cast<std::size_t>(k) * dim_ + d] += batch[i * dim_ + d];
    }
  }
  double total = 0.0;
  for (int k = 0; k < num_codes_; ++k) {
    counts_[k] = decay_ * counts_[k] + (1.0 - decay_) * count[k];
    total += counts_[k];
  }
  for (std::size_t j = 0; j < sums_.size(); ++j) {
    sums_[j] = decay_ * sums_[j] + (1.0 - decay_) * sum[j];
  }
  for (int k = 0; k < num_codes_; ++k) {
    const double smoothed =
        (counts_[k] + epsilon_) / (total + num_codes_ * epsilon_) * total;
    if (!(smoothed > 0.0)) continue;
    for (int d = 0; d < dim_; ++d) {
      const std::size_t j = static_cast<std::size_t>(k) * dim_ + d;
      embeddings_[j] = sums_[j] / smoothed;
    }
  }
  numerics::CheckFinite(embeddings_, "codebook ema update");
}

int Codebook::DeadCodeRestart(std::span<const double> batch, double threshold, Rng& rng) {
  RequireBatch(batch, dim_, "dead code restart");
  const int n = static_cast<int>(batch.size() / dim_);
  int restarted = 0;
  for (int k = 0; k < num_codes_; ++k) {
    if (counts_[k] >= threshold) continue;
    const int i = rng.UniformInt(n);
    for (int d = 0; d < dim_; ++d) {
      const std::size_t j = static_cast<std::size_t>(k) * dim_ + d;
      embeddings_[j] = batch[static_cast<std::size_t>(i) * dim_ + d];
      sums_[j] = embeddings_[j];
    }
    counts_[k] = 1.0;
    ++restarted;
  }
  return restarted;
}

int JointCardinality(std::span<const int> sizes) {
  int total = 1;
  for (int s : sizes) total *= s;
  return total;
}

int JointIndex(std::span<const int> codes, std::span<const int> sizes) {
  if (codes.size() != sizes.size()) throw ContractError("joint index: arity mismatch");
  int joint = 0;
  for (std::size_t b = 0; b < codes.size(); ++b) {
    if (codes[b] < 0 || codes[b] >= sizes[b]) {
      throw ContractError("joint index: code " + std::to_string(codes[b]) +
                          " outside book " + std::to_string(b));
    }
    joint = joint * sizes[b] + codes[b];
  }
  return joint;
}

std::vector<int> SplitJointIndex(int joint, std::span<const int> sizes) {
  if (joint < 0 || joint >= JointCardinality(sizes)) {
    throw ContractError("joint index " + std::to_string(joint) + " out of range");
  }
  std::vector<int> codes(sizes.size());
  for (int b = static_cast<int>(sizes.size()) - 1; b >= 0; --b) {
    codes[b] = joint % sizes[b];
    joint /= sizes[b];
  }
  return codes;
}

void StoreCodebooks(numerics::Checkpoint& ckpt, const std::vector<Codebook>& books,
                    const std::string& prefix) {
  nlohmann::json list = nlohmann::json::array();
  for (std::size_t b = 0; b < books.size(); ++b) {
    const Codebook& book = books[b];
    list.push_back({{"K", book.num_codes()},
                    {"D", book.dim()},
                    {"decay", book.decay()},
                    {"epsilon", book.epsilon()}});
    const std::string key = prefix + ":book" + std::to_string(b);
    ckpt.AddArray(key + ":e", {book.embeddings().begin(), book.embeddings().end()});
    ckpt.AddArray(key + ":N", {book.ema_counts().begin(), book.ema_counts().end()});
    ckpt.AddArray(key + ":m", {book.ema_sums().begin(), book.ema_sums().end()});
  }
  ckpt.meta()["codebooks"][prefix] = list;
}

void LoadCodebooks(const numerics::Checkpoint& ckpt, std::vector<Codebook>& books,
                   const std::string& prefix) {
  const auto& meta = ckpt.meta();
  if (!meta.contains("codebooks") || !meta["codebooks"].contains(prefix)) {
    throw ArtifactMismatch("checkpoint has no codebooks '" + prefix + "'");
  }
  const auto& list = meta["codebooks"][prefix];
  if (list.size() != books.size()) {
    throw ArtifactMismatch("codebook count mismatch for '" + prefix + "'");
  }
  for (std::size_t b = 0; b < books.size(); ++b) {
    if (list[b].at("K").get<int>() != books[b].num_codes() ||
        list[b].at("D").get<int>() != books[b].dim()) {
      throw ArtifactMismatch("codebook " + std::to_string(b) + " of '" + prefix +
                             "' has a different K or D");
    }
    const std::string key = prefix + ":book" + std::to_string(b);
    books[b] = Codebook(books[b].num_codes(), books[b].dim(),
                        list[b].at("decay").get<double>(), list[b].at("epsilon").get<double>());
    books[b].SetState(ckpt.Array(key + ":e"), ckpt.Array(key + ":N"), ckpt.Array(key + ":m"));
  }
}

}  // namespace vqplan::vq
