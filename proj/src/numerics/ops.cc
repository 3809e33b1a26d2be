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

#include "vqplan/numerics/ops.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "vqplan/common/error.h"
#include "vqplan/kernels/kernels.h"

namespace vqplan::numerics {
namespace {

std::size_t Count(const Tape& t, Var v) {
  return static_cast<std::size_t>(t.rows(v)) * t.cols(v);
}

void RequireSameShape(const Tape& t, Var a, Var b, const char* op) {
  if (t.rows(a) != t.rows(b) || t.cols(a) != t.cols(b)) {
    throw DimensionError(std::string(op) + ": operand shapes differ");
  }
}

}  // namespace

Var Linear(Tape& tape, Var x, Var w, Var b) {
  const int batch = tape.rows(x);
  const int in = tape.cols(x);
  const int out = tape.rows(w);
  if (tape.cols(w) != in) {
    throw DimensionError("linear: input width " + std::to_string(in) +
                         " but weight expects " + std::to_string(tape.cols(w)));
  }
  if (b.valid() && (tape.rows(b) != 1 || tape.cols(b) != out)) {
    throw DimensionError("linear: bias must be 1x" + std::to_string(out));
  }
  std::vector<double> y(static_cast<std::size_t>(batch) * out);
  kernels::Active().gemm_nt(batch, out, in, tape.data(x), tape.data(w),
                            b.valid() ? tape.data(b) : nullptr, y.data());
  std::vector<int> inputs = {x.id, w.id};
  if (b.valid()) inputs.push_back(b.id);
  return tape.Record(
      batch, out, std::move(y), std::move(inputs),
      [x, w, b, batch, in, out](Tape& t, int self) {
        const auto& k = kernels::Active();
        const double* g = t.grad(self).data();
        if (t.wants_grad(x.id)) {
          k.gemm_nn_acc(batch, out, in, g, t.data(w), t.grad(x.id).data());
        }
        if (t.wants_grad(w.id)) {
          k.gemm_tn_acc(batch, out, in, g, t.data(x), t.grad(w.id).data());
        }
        if (b.valid() && t.wants_grad(b.id)) {
          auto gb = t.grad(b.id);
          for (int r = 0; r < batch; ++r) {
            k.axpy(out, 1.0, g + static_cast<std::size_t>(r) * out, gb.data());
          }
        }
      });
}

Var Tanh(Tape& tape, Var x) {
  auto xv = tape.value(x);
  std::vector<double> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(xv[i]);
  return tape.Record(tape.rows(x), tape.cols(x), std::move(y), {x.id},
                     [x](Tape& t, int self) {
                       auto g = t.grad(self);
                       auto y = t.value(Var{self});
                       auto gx = t.grad(x.id);
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         gx[i] += g[i] * (1.0 - y[i] * y[i]);
                       }
                     });
}

Var Relu(Tape& tape, Var x) {
  auto xv = tape.value(x);
  std::vector<double> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return tape.Record(tape.rows(x), tape.cols(x), std::move(y), {x.id},
                     [x](Tape& t, int self) {
                       auto g = t.grad(self);
                       auto xv = t.value(x);
                       auto gx = t.grad(x.id);
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         if (xv[i] > 0.0) gx[i] += g[i];
                       }
                     });
}

Var Add(Tape& tape, Var a, Var b) {
  RequireSameShape(tape, a, b, "add");
  auto av = tape.value(a);
  auto bv = tape.value(b);
  std::vector<double> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
  return tape.Record(tape.rows(a), tape.cols(a), std::move(y), {a.id, b.id},
                     [a, b](Tape& t, int self) {
                       auto g = t.grad(self);
                       for (Var in : {a, b}) {
                         if (!t.wants_grad(in.id)) continue;
                         auto gi = t.grad(in.id);
                         for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
                       }
                     });
}

Var Mul(Tape& tape, Var a, Var b) {
  RequireSameShape(tape, a, b, "mul");
  auto av = tape.value(a);
  auto bv = tape.value(b);
  std::vector<double> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
  return tape.Record(tape.rows(a), tape.cols(a), std::move(y), {a.id, b.id},
                     [a, b](Tape& t, int self) {
                       auto g = t.grad(self);
                       auto av = t.value(a);
                       auto bv = t.value(b);
                       if (t.wants_grad(a.id)) {
                         auto ga = t.grad(a.id);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
                       }
                       if (t.wants_grad(b.id)) {
                         auto gb = t.grad(b.id);
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                       }
                     });
}

Var Scale(Tape& tape, Var x, double s) {
  auto xv = tape.value(x);
  std::vector<double> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = s * xv[i];
  return tape.Record(tape.rows(x), tape.cols(x), std::move(y), {x.id},
                     [x, s](Tape& t, int self) {
                       auto g = t.grad(self);
                       auto gx = t.grad(x.id);
                       for (std::size_t i = 0; i < g.size(); ++i) gx[i] += s * g[i];
                     });
}

Var Sum(Tape& tape, Var x) {
  double total = 0.0;
  for (double v : tape.value(x)) total += v;
  return tape.Record(1, 1, {total}, {x.id}, [x](Tape& t, int self) {
    const double g = t.grad(self)[0];
    for (double& gi : t.grad(x.id)) gi += g;
  });
}

Var AddN(Tape& tape, std::span<const Var> xs) {
  if (xs.empty()) throw ContractError("add_n: no operands");
  std::vector<double> y(Count(tape, xs[0]), 0.0);
  std::vector<int> ids;
  for (Var v : xs) {
    RequireSameShape(tape, xs[0], v, "add_n");
    auto vv = tape.value(v);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += vv[i];
    ids.push_back(v.id);
  }
  std::vector<int> captured = ids;
  return tape.Record(tape.rows(xs[0]), tape.cols(xs[0]), std::move(y),
                     std::move(ids), [captured](Tape& t, int self) {
                       auto g = t.grad(self);
                       for (int id : captured) {
                         if (!t.wants_grad(id)) continue;
                         auto gi = t.grad(id);
                         for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
                       }
                     });
}

Var ConcatCols(Tape& tape, std::span<const Var> xs) {
  if (xs.empty()) throw ContractError("concat: no operands");
  const int rows = tape.rows(xs[0]);
  std::vector<int> widths;
  int total = 0;
  for (Var v : xs) {
    if (tape.rows(v) != rows) throw DimensionError("concat: row counts differ");
    widths.push_back(tape.cols(v));
    total += tape.cols(v);
  }
  std::vector<double> y(static_cast<std::size_t>(rows) * total);
  int offset = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double* src = tape.data(xs[k]);
    for (int r = 0; r < rows; ++r) {
      std::copy_n(src + static_cast<std::size_t>(r) * widths[k], widths[k],
                  y.data() + static_cast<std::size_t>(r) * total + offset);
    }
    offset += widths[k];
  }
  std::vector<int> ids;
  for (Var v : xs) ids.push_back(v.id);
  std::vector<int> captured = ids;
  return tape.Record(
      rows, total, std::move(y), std::move(ids),
      [captured, widths, rows, total](Tape& t, int self) {
        auto g = t.grad(self);
        int offset = 0;
        for (std::size_t k = 0; k < captured.size(); ++k) {
          if (t.wants_grad(captured[k])) {
            auto gi = t.grad(captured[k]);
            for (int r = 0; r < rows; ++r) {
              const double* src = g.data() + static_cast<std::size_t>(r) * total + offset;
              double* dst = gi.data() + static_cast<std::size_t>(r) * widths[k];
              for (int c = 0; c < widths[k]; ++c) dst[c] += src[c];
            }
          }
          offset += widths[k];
        }
      });
}

Var SliceCols(Tape& tape, Var x, int start, int count) {
  const int rows = tape.rows(x);
  const int cols = tape.cols(x);
  if (start < 0 || count <= 0 || start + count > cols) {
    throw DimensionError("slice: column range out of bounds");
  }
  std::vector<double> y(static_cast<std::size_t>(rows) * count);
  const double* src = tape.data(x);
  for (int r = 0; r < rows; ++r) {
    std::copy_n(src + static_cast<std::size_t>(r) * cols + start, count,
                y.data() + static_cast<std::size_t>(r) * count);
  }
  return tape.Record(rows, count, std::move(y), {x.id},
                     [x, rows, cols, start, count](Tape& t, int self) {
                       auto g = t.grad(self);
                       auto gx = t.grad(x.id);
                       for (int r = 0; r < rows; ++r) {
                         for (int c = 0; c < count; ++c) {
                           gx[static_cast<std::size_t>(r) * cols + start + c] +=
                               g[static_cast<std::size_t>(r) * count + c];
                         }
                       }
                     });
}

Var Reshape(Tape& tape, Var x, int rows, int cols) {
  if (static_cast<std::size_t>(rows) * cols != Count(tape, x)) {
    throw DimensionError("reshape: element count changes");
  }
  auto xv = tape.value(x);
  return tape.Record(rows, cols, std::vector<double>(xv.begin(), xv.end()),
                     {x.id}, [x](Tape& t, int self) {
                       auto g = t.grad(self);
                       auto gx = t.grad(x.id);
                       for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                     });
}

Var Gather(Tape& tape, Var table, std::span<const int> indices) {
  const int vocab = tape.rows(table);
  const int dim = tape.cols(table);
  std::vector<int> idx(indices.begin(), indices.end());
  std::vector<double> y(idx.size() * dim);
  const double* src = tape.data(table);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= vocab) {
      throw ContractError("gather: index " + std::to_string(idx[i]) +
                          " outside table of " + std::to_string(vocab));
    }
    std::copy_n(src + static_cast<std::size_t>(idx[i]) * dim, dim,
                y.data() + i * dim);
  }
  const int rows = static_cast<int>(idx.size());
  return tape.Record(rows, dim, std::move(y), {table.id},
                     [table, idx, dim](Tape& t, int self) {
                       auto g = t.grad(self);
                       auto gt = t.grad(table.id);
                       for (std::size_t i = 0; i < idx.size(); ++i) {
                         for (int c = 0; c < dim; ++c) {
                           gt[static_cast<std::size_t>(idx[i]) * dim + c] += g[i * dim + c];
                         }
                       }
                     });
}

double LogSumExp(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double v : logits) s += std::exp(v - m);
  return m + std::log(s);
}

void SoftmaxInPlace(std::span<double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double& v : logits) {
    v = std::exp(v - m);
    s += v;
  }
  for (double& v : logits) v /= s;
}

std::vector<double> Softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  SoftmaxInPlace(p);
  return p;
}

Var SoftmaxCrossEntropy(Tape& tape, Var logits, std::span<const int> targets,
                        std::span<const double> weights) {
  const int rows = tape.rows(logits);
  const int classes = tape.cols(logits);
  if (static_cast<int>(targets.size()) != rows) {
    throw DimensionError("cross entropy: one target per row required");
  }
  if (!weights.empty() && static_cast<int>(weights.size()) != rows) {
    throw DimensionError("cross entropy: one weight per row required");
  }
  const double* lv = tape.data(logits);
  std::vector<double> probs(static_cast<std::size_t>(rows) * classes);
  double total = 0.0;
  for (int r = 0; r < rows; ++r) {
    const int t = targets[r];
    if (t >= classes) {
      throw ContractError("cross entropy: target " + std::to_string(t) +
                          " out of range for " + std::to_string(classes) +
                          " classes");
    }
    std::span<const double> row(lv + static_cast<std::size_t>(r) * classes, classes);
    std::copy(row.begin(), row.end(), probs.begin() + static_cast<std::size_t>(r) * classes);
    SoftmaxInPlace({probs.data() + static_cast<std::size_t>(r) * classes,
                    static_cast<std::size_t>(classes)});
    if (t < 0) continue;
    const double w = weights.empty() ? 1.0 : weights[r];
    if (w == 0.0) continue;
    total += w * (LogSumExp(row) - row[t]);
  }
  std::vector<int> tgt(targets.begin(), targets.end());
  std::vector<double> wts(weights.begin(), weights.end());
  return tape.Record(
      1, 1, {total}, {logits.id},
      [logits, tgt, wts, probs, rows, classes](Tape& t, int self) {
        const double g = t.grad(self)[0];
        auto gl = t.grad(logits.id);
        for (int r = 0; r < rows; ++r) {
          if (tgt[r] < 0) continue;
          const double w = (wts.empty() ? 1.0 : wts[r]) * g;
          if (w == 0.0) continue;
          const std::size_t base = static_cast<std::size_t>(r) * classes;
          for (int c = 0; c < classes; ++c) gl[base + c] += w * probs[base + c];
          gl[base + tgt[r]] -= w;
        }
      });
}

Var SoftmaxCrossEntropy(Tape& tape, Var logits, int target) {
  if (tape.rows(logits) != 1) {
    throw DimensionError("cross entropy: single-target form needs one row");
  }
  if (target < 0 || target >= tape.cols(logits)) {
    throw ContractError("cross entropy: target " + std::to_string(target) +
                        " out of range");
  }
  const int t[1] = {target};
  return SoftmaxCrossEntropy(tape, logits, t);
}

Var SquaredError(Tape& tape, Var pred, std::span<const double> target,
                 std::span<const double> weights) {
  const int rows = tape.rows(pred);
  const int cols = tape.cols(pred);
  if (target.size() != Count(tape, pred)) {
    throw DimensionError("squared error: target size differs from prediction");
  }
  if (!weights.empty() && static_cast<int>(weights.size()) != rows) {
    throw DimensionError("squared error: one weight per row required");
  }
  const double* pv = tape.data(pred);
  double total = 0.0;
  for (int r = 0; r < rows; ++r) {
    const double w = weights.empty() ? 1.0 : weights[r];
    if (w == 0.0) continue;
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * cols + c;
      const double d = pv[i] - target[i];
      acc += d * d;
    }
    total += w * acc;
  }
  std::vector<double> tgt(target.begin(), target.end());
  std::vector<double> wts(weights.begin(), weights.end());
  return tape.Record(1, 1, {total}, {pred.id},
                     [pred, tgt, wts, rows, cols](Tape& t, int self) {
                       const double g = t.grad(self)[0];
                       auto pv = t.value(pred);
                       auto gp = t.grad(pred.id);
                       for (int r = 0; r < rows; ++r) {
                         const double w = (wts.empty() ? 1.0 : wts[r]) * g;
                         if (w == 0.0) continue;
                         for (int c = 0; c < cols; ++c) {
                           const std::size_t i = static_cast<std::size_t>(r) * cols + c;
                           gp[i] += 2.0 * w * (pv[i] - tgt[i]);
                         }
                       }
                     });
}

}  // namespace vqplan::numerics
