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

#ifndef VQPLAN_VQ_CODEBOOK_H_
#define VQPLAN_VQ_CODEBOOK_H_

#include <span>
#include <string>
#include <vector>

#include "vqplan/common/rng.h"
#include "vqplan/numerics/checkpoint.h"

namespace vqplan::vq {

struct QuantizeResult {
  int index = -1;
  std::vector<double> embedding;  // e_c
  std::vector<double> z_u;
  double commitment = 0.0;  // ||z_u - e_c||^2
};

// K embeddings of width D learned by exponential moving averages of the
// encoder outputs assigned to them.
//
// Quantize() is read-only and may be called from many threads. EmaUpdate(),
// DeadCodeRestart() and the initializers need exclusive access.
class Codebook {
 public:
  Codebook(int num_codes, int dim, double decay = 0.99, double epsilon = 1e-5);

  int num_codes() const { return num_codes_; }
  int dim() const { return dim_; }
  double decay() const { return decay_; }
  double epsilon() const { return epsilon_; }

  std::span<const double> embedding(int k) const;
  std::span<const double> embeddings() const { return embeddings_; }
  std::span<const double> ema_counts() const { return counts_; }
  std::span<const double> ema_sums() const { return sums_; }

  // Sets embeddings directly and zeroes the EMA statistics.
  void SetEmbeddings(std::vector<double> flat);
  // Sets embeddings and statistics together (deserialization and tests).
  void SetState(std::vector<double> embeddings, std::vector<double> counts,
                std::vector<double> sums);

  // Picks K distinct rows of `batch` ([n, D]) at random. Each picked code
  // starts with count 1 and sum e_k. When the batch holds fewer than K
  // distinct rows the remainder are jittered copies.
  void InitFromBatch(std::span<const double> batch, Rng& rng);

  // argmin_k ||z - e_k||, lowest index on ties.
  int Nearest(std::span<const double> z) const;
  QuantizeResult Quantize(std::span<const double> z) const;
  // One index per row of `batch` ([n, D]).
  std::vector<int> NearestBatch(std::span<const double> batch) const;

  // N_k <- g N_k + (1-g) n_k; m_k <- g m_k + (1-g) sum_k; e_k <- m_k / N^_k
  // with Laplace smoothing N^_k = (N_k + eps) / (sum N + K eps) * sum N.
  // A code whose smoothed count is zero keeps its embedding.
  void EmaUpdate(std::span<const int> indices, std::span<const double> batch);

  // Codes with EMA count below `threshold` are moved onto a random batch
  // row (count 1, sum = row). Returns how many moved.
  int DeadCodeRestart(std::span<const double> batch, double threshold, Rng& rng);

 private:
  int num_codes_;
  int dim_;
  double decay_;
  double epsilon_;
  std::vector<double> embeddings_;
  std::vector<double> counts_;
  std::vector<double> sums_;
};

// Mixed-radix joint id for a tuple of per-book indices (book 0 most
// significant).
int JointIndex(std::span<const int> codes, std::span<const int> sizes);
std::vector<int> SplitJointIndex(int joint, std::span<const int> sizes);
int JointCardinality(std::span<const int> sizes);

void StoreCodebooks(numerics::Checkpoint& ckpt, const std::vector<Codebook>& books,
                    const std::string& prefix);
// Throws ArtifactMismatch when the stored books differ in number or shape.
void LoadCodebooks(const numerics::Checkpoint& ckpt, std::vector<Codebook>& books,
                   const std::string& prefix);

}  // namespace vqplan::vq

#endif  // VQPLAN_VQ_CODEBOOK_H_
