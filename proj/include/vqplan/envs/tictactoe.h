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

#ifndef VQPLAN_ENVS_TICTACTOE_H_
#define VQPLAN_ENVS_TICTACTOE_H_

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace vqplan::envs {

// Cells from the agent's point of view: 0 empty, 1 agent, 2 opponent.
using Board = std::array<std::int8_t, 9>;

constexpr std::int8_t kEmpty = 0;
constexpr std::int8_t kAgent = 1;
constexpr std::int8_t kOpponent = 2;

// 0 when nobody has three in a row, otherwise the winning mark.
int Winner(const Board& b);
bool Full(const Board& b);
bool Terminal(const Board& b);
std::vector<int> LegalMoves(const Board& b);
int BoardCode(const Board& b);  // base-3, cell 0 least significant
Board BoardFromCode(int code);

enum class OpponentKind { kUniform, kEpsilonMinimax };

struct OpponentSpec {
  OpponentKind kind = OpponentKind::kUniform;
  double epsilon = 0.0;  // chance of a uniform move for kEpsilonMinimax
};

enum class ValueMode {
  kExpectimax,  // expectation over the opponent policy
  kMinimax,     // opponent picks the reply worst for the agent
  kMaximax,     // opponent picks the reply best for the agent
};

// Exact game values for positions where the agent is to move, from the
// agent's point of view (+1 win, 0 draw, -1 loss). Every such position is
// solved at construction, so lookups are read-only and thread-safe.
class TicTacToeOracle {
 public:
  explicit TicTacToeOracle(OpponentSpec opponent);

  const OpponentSpec& opponent() const { return opponent_; }

  struct Result {
    double value = 0.0;
    std::vector<int> optimal;   // every maximizing first move
    std::array<double, 9> q{};  // action values; NaN for occupied cells
  };

  // `board` must be non-terminal with the agent to move.
  Result Evaluate(const Board& board, ValueMode mode) const;
  double Value(const Board& board, ValueMode mode) const;

  // Reply distribution of the configured opponent on a board where the
  // opponent is to move. Probabilities sum to 1.
  std::vector<std::pair<int, double>> OpponentPolicy(const Board& board) const;

  // Agent-to-move positions reachable in play with either side starting.
  const std::vector<int>& positions() const { return positions_; }

 private:
  double Solve(int code, int mode);
  double ActionValue(const Board& board, int action, int mode) const;
  double ReplyValue(const Board& after_reply, int mode) const;

  OpponentSpec opponent_;
  std::array<std::vector<double>, 3> values_;
  std::vector<int> positions_;
};

}  // namespace vqplan::envs

#endif  // VQPLAN_ENVS_TICTACTOE_H_
