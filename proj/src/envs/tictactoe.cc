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

#include "vqplan/envs/tictactoe.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "vqplan/common/error.h"

namespace vqplan::envs {
namespace {

constexpr int kLines[8][3] = {{0, 1, 2}, {3, 4, 5}, {6, 7, 8}, {0, 3, 6},
                              {1, 4, 7}, {2, 5, 8}, {0, 4, 8}, {2, 4, 6}};
constexpr int kNumCodes = 19683;  // 3^9
constexpr double kUnknown = std::numeric_limits<double>::quiet_NaN();
constexpr double kTieTolerance = 1e-12;

// Value to the agent of a board on which the game just ended.
double TerminalValue(const Board& b) {
  const int w = Winner(b);
  return w == kAgent ? 1.0 : (w == kOpponent ? -1.0 : 0.0);
}

int Count(const Board& b, std::int8_t mark) {
  return static_cast<int>(std::count(b.begin(), b.end(), mark));
}

}  // namespace

int Winner(const Board& b) {
  for (const auto& line : kLines) {
    const std::int8_t m = b[line[0]];
    if (m != kEmpty && m == b[line[1]] && m == b[line[2]]) return m;
  }
  return 0;
}

bool Full(const Board& b) {
  return std::none_of(b.begin(), b.end(), [](std::int8_t c) { return c == kEmpty; });
}

bool Terminal(const Board& b) { return Winner(b) != 0 || Full(b); }

std::vector<int> LegalMoves(const Board& b) {
  std::vector<int> moves;
  if (Winner(b) != 0) return moves;
  for (int i = 0; i < 9; ++i) {
    if (b[i] == kEmpty) moves.push_back(i);
  }
  return moves;
}

int BoardCode(const Board& b) {
  int code = 0;
  for (int i = 8; i >= 0; --i) code = code * 3 + b[i];
  return code;
}

Board BoardFromCode(int code) {
  Board b{};
  for (int i = 0; i < 9; ++i) {
    b[i] = static_cast<std::int8_t>(code % 3);
    code /= 3;
  }
  return b;
}

TicTacToeOracle::TicTacToeOracle(OpponentSpec opponent) : opponent_(opponent) {
  if (opponent.epsilon < 0.0 || opponent.epsilon > 1.0) {
    throw ConfigError("opponent epsilon must be in [0,1]");
  }
  for (auto& v : values_) v.assign(kNumCodes, kUnknown);
  // Minimax first: the epsilon-minimax opponent reads it.
  const int order[3] = {static_cast<int>(ValueMode::kMinimax),
                        static_cast<int>(ValueMode::kMaximax),
                        static_cast<int>(ValueMode::kExpectimax)};
  std::set<int> reachable;
  // Enumerate agent-to-move positions: agent first (equal counts) or
  // opponent first (one extra opponent mark).
  for (int code = 0; code < kNumCodes; ++code) {
    const Board b = BoardFromCode(code);
    if (Terminal(b)) continue;
    const int a = Count(b, kAgent);
    const int o = Count(b, kOpponent);
    if (a == o || o == a + 1) reachable.insert(code);
  }
  positions_.assign(reachable.begin(), reachable.end());
  for (int mode : order) {
    for (int code : positions_) Solve(code, mode);
  }
}

double TicTacToeOracle::ReplyValue(const Board& after_reply, int mode) const {
  if (Terminal(after_reply)) return TerminalValue(after_reply);
  const double v = values_[mode][BoardCode(after_reply)];
  if (std::isnan(v)) throw ContractError("oracle: position not solved");
  return v;
}

double TicTacToeOracle::ActionValue(const Board& board, int action, int mode) const {
  Board after = board;
  after[action] = kAgent;
  if (Terminal(after)) return TerminalValue(after);
  if (mode == static_cast<int>(ValueMode::kExpectimax)) {
    double total = 0.0;
    for (const auto& [reply, p] : OpponentPolicy(after)) {
      Board next = after;
      next[reply] = kOpponent;
      total += p * ReplyValue(next, mode);
    }
    return total;
  }
  const bool minimize = mode == static_cast<int>(ValueMode::kMinimax);
  double best = minimize ? 2.0 : -2.0;
  for (int reply : LegalMoves(after)) {
    Board next = after;
    next[reply] = kOpponent;
    const double v = ReplyValue(next, mode);
    best = minimize ? std::min(best, v) : std::max(best, v);
  }
  return best;
}

double TicTacToeOracle::Solve(int code, int mode) {
  double& slot = values_[mode][code];
  if (!std::isnan(slot)) return slot;
  const Board b = BoardFromCode(code);
  double best = -2.0;
  for (int a : LegalMoves(b)) {
    Board after = b;
    after[a] = kAgent;
    if (!Terminal(after)) {
      // Make sure every agent-to-move successor is solved first.
      for (int reply : LegalMoves(after)) {
        Board next = after;
        next[reply] = kOpponent;
        if (!Terminal(next)) Solve(BoardCode(next), mode);
      }
    }
    best = std::max(best, ActionValue(b, a, mode));
  }
  slot = best;
  return best;
}

std::vector<std::pair<int, double>> TicTacToeOracle::OpponentPolicy(const Board& board) const {
  const auto moves = LegalMoves(board);
  if (moves.empty() || Terminal(board)) {
    throw ContractError("opponent policy requested on a finished board");
  }
  const double n = static_cast<double>(moves.size());
  std::vector<std::pair<int, double>> policy;
  if (opponent_.kind == OpponentKind::kUniform) {
    for (int m : moves) policy.emplace_back(m, 1.0 / n);
    return policy;
  }
  // Minimax-optimal replies minimize the agent's minimax value.
  const int mm = static_cast<int>(ValueMode::kMinimax);
  std::vector<double> v(moves.size());
  double best = 2.0;
  for (std::size_t i = 0; i < moves.size(); ++i) {
    Board next = board;
    next[moves[i]] = kOpponent;
    v[i] = ReplyValue(next, mm);
    best = std::min(best, v[i]);
  }
  int num_best = 0;
  for (double x : v) num_best += x <= best + kTieTolerance;
  for (std::size_t i = 0; i < moves.size(); ++i) {
    double p = opponent_.epsilon / n;
    if (v[i] <= best + kTieTolerance) p += (1.0 - opponent_.epsilon) / num_best;
    policy.emplace_back(moves[i], p);
  }
  return policy;
}

TicTacToeOracle::Result TicTacToeOracle::Evaluate(const Board& board, ValueMode mode) const {
  if (Terminal(board)) throw ContractError("oracle: board is terminal");
  if (std::isnan(values_[static_cast<int>(mode)][BoardCode(board)])) {
    throw ContractError("oracle: not an agent-to-move position");
  }
  Result r;
  r.q.fill(std::numeric_limits<double>::quiet_NaN());
  r.value = -2.0;
  for (int a : LegalMoves(board)) {
    r.q[a] = ActionValue(board, a, static_cast<int>(mode));
    r.value = std::max(r.value, r.q[a]);
  }
  for (int a : LegalMoves(board)) {
    if (r.q[a] >= r.value - kTieTolerance) r.optimal.push_back(a);
  }
  return r;
}

double TicTacToeOracle::Value(const Board& board, ValueMode mode) const {
  return Evaluate(board, mode).value;
}

}  // namespace vqplan::envs
