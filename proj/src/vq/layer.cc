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

#include "vqplan/vq/layer.h"

#include "vqplan/common/error.h"
#include "vqplan/numerics/ops.h"

namespace vqplan::vq {

using numerics::Tape;
using numerics::Var;

Var StraightThrough(Tape& tape, Var quantized, Var z_u) {
  if (tape.rows(quantized) != tape.rows(z_u) || tape.cols(quantized) != tape.cols(z_u)) {
    throw DimensionError("straight-through: shapes differ");
  }
  auto qv = tape.value(quantized);
  return tape.Record(tape.rows(z_u), tape.cols(z_u), {qv.begin(), qv.end()}, {z_u.id},
                     [z_u](Tape& t, int self) {
                       auto g = t.grad(self);
                       auto gz = t.grad(z_u.id);
                       for (std::size_t i = 0; i < g.size(); ++i) gz[i] += g[i];
                     });
}

QuantizationLayer::QuantizationLayer(int num_books, int num_codes, int dim, double decay,
                                     double epsilon) {
  if (num_books < 1) throw ContractError("quantization layer needs at least one book");
  for (int b = 0; b < num_books; ++b) books_.emplace_back(num_codes, dim, decay, epsilon);
}

std::vector<int> QuantizationLayer::sizes() const {
  std::vector<int> s;
  for (const auto& b : books_) s.push_back(b.num_codes());
  return s;
}

std::vector<int> QuantizationLayer::Encode(std::span<const double> z) const {
  if (static_cast<int>(z.size()) != width()) {
    throw DimensionError("quantization layer: input width " + std::to_string(z.size()) +
                         ", expected " + std::to_string(width()));
  }
  std::vector<int> codes(num_books());
  for (int b = 0; b < num_books(); ++b) {
    codes[b] = books_[b].Nearest(z.subspan(static_cast<std::size_t>(b) * dim(), dim()));
  }
  return codes;
}

std::vector<double> QuantizationLayer::Lookup(std::span<const int> codes) const {
  if (static_cast<int>(codes.size()) != num_books()) {
    throw ContractError("quantization layer: expected " + std::to_string(num_books()) +
                        " code indices");
  }
  std::vector<double> out;
  out.reserve(width());
  for (int b = 0; b < num_books(); ++b) {
    auto e = books_[b].embedding(codes[b]);
    out.insert(out.end(), e.begin(), e.end());
  }
  return out;
}

QuantizedBatch QuantizationLayer::Forward(Tape& tape, Var z) const {
  if (tape.cols(z) != width()) {
    throw DimensionError("quantization layer: input width " + std::to_string(tape.cols(z)) +
                         ", expected " + std::to_string(width()));
  }
  const int rows = tape.rows(z);
  auto zv = tape.value(z);
  QuantizedBatch out;
  out.codes.reserve(static_cast<std::size_t>(rows) * num_books());
  std::vector<double> e;
  e.reserve(zv.size());
  for (int r = 0; r < rows; ++r) {
    auto row = zv.subspan(static_cast<std::size_t>(r) * width(), width());
    auto codes = Encode(row);
    auto emb = Lookup(codes);
    out.codes.insert(out.codes.end(), codes.begin(), codes.end());
    e.insert(e.end(), emb.begin(), emb.end());
  }
  out.commitment = numerics::SquaredError(tape, z, e);
  Var quantized = tape.Constant(rows, width(), std::move(e));
  out.output = StraightThrough(tape, quantized, z);
  return out;
}

std::vector<double> QuantizationLayer::BookSlice(std::span<const double> z, int book) const {
  if (z.empty() || z.size() % width() != 0) {
    throw DimensionError("quantization layer: batch width");
  }
  const std::size_t rows = z.size() / width();
  std::vector<double> slice;
  slice.reserve(rows * dim());
  for (std::size_t r = 0; r < rows; ++r) {
    auto s = z.subspan(r * width() + static_cast<std::size_t>(book) * dim(), dim());
    slice.insert(slice.end(), s.begin(), s.end());
  }
  return slice;
}

void QuantizationLayer::EmaUpdate(std::span<const double> z, std::span<const int> codes) {
  const std::size_t rows = z.size() / width();
  if (codes.size() != rows * num_books()) {
    throw DimensionError("quantization layer: codes do not match batch");
  }
  for (int b = 0; b < num_books(); ++b) {
    std::vector<int> idx(rows);
    for (std::size_t r = 0; r < rows; ++r) idx[r] = codes[r * num_books() + b];
    books_[b].EmaUpdate(idx, BookSlice(z, b));
  }
}

void QuantizationLayer::InitFromBatch(std::span<const double> z, Rng& rng) {
  for (int b = 0; b < num_books(); ++b) books_[b].InitFromBatch(BookSlice(z, b), rng);
}

int QuantizationLayer::DeadCodeRestart(std::span<const double> z, double threshold, Rng& rng) {
  int total = 0;
  for (int b = 0; b < num_books(); ++b) {
    total += books_[b].DeadCodeRestart(BookSlice(z, b), threshold, rng);
  }
  return total;
}

}  // namespace vqplan::vq
