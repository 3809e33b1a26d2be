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


#ifndef VQPLAN_MCTS_SEARCH_H_
#define VQPLAN_MCTS_SEARCH_H_

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "vqplan/common/rng.h"
#include "vqplan/envs/environment.h"

namespace vqplan::mcts {

enum class ChanceMode { kCooperative, kNeutral, kAdversarial };
enum class ChanceRule { kUcb, kQuasirandom };
enum class ActRule { kArgmax, kStochasticVisit };
// Node alternation below the root: hybrid action/chance, pure action once
// then chance only, or actions only (deterministic baseline).
enum class TreeShape { kHybrid, kPure, kActionsOnly };

const char* ChanceModeName(ChanceMode m);
ChanceMode ParseChanceMode(const std::string& s);
const char* TreeShapeName(TreeShape s);
TreeShape ParseTreeShape(const std::string& s);

struct SearchConfig {
  int budget = 200;
  double c1 = 1.25;     // c_init
  double c2 = 19652.0;  // c_base
  double discount = 1.0;
  ChanceMode chance_mode = ChanceMode::kNeutral;
  ChanceRule chance_rule = ChanceRule::kUcb;
  bool root_noise = false;
  double noise_alpha = 0.3;
  double noise_fraction = 0.25;
  int pure_repeat_limit = 10;
  ActRule act_rule = ActRule::kArgmax;
  double visit_threshold = 0.01;
  int move_cutoff = 30;
  TreeShape shape = TreeShape::kHybrid;

  // ConfigError on invalid values, including quasirandom selection outside
  // neutral mode.
  void Validate() const;
  nlohmann::json ToJson() const;
  static SearchConfig FromJson(const nlohmann::json& j);
};

// What a model reports for the node reached by one step.
struct ModelOutput {
  std::vector<double> hidden;
  std::vector<double> policy;       // over actions
  std::vector<double> code_policy;  // over joint codes
  double value = 0.0;
  double reward = 0.0;  // reward on the edge into this node
};

// Learned (or tabular) model the search unrolls. Implementations must be
// safe to call concurrently from several searches.
class SearchModel {
 public:
  virtual ~SearchModel() = default;
  virtual int num_actions() const = 0;
  virtual int num_codes() const = 0;  // joint codes; 0 without chance nodes
  virtual ModelOutput Root(const envs::Observation& observation) const = 0;
  virtual ModelOutput Action(std::span<const double> hidden, int action) const = 0;
  virtual ModelOutput Code(std::span<const double> hidden, int code) const = 0;
};

enum class NodeKind { kAction, kChance };

// ln((N + c2 + 1) / c2) + c1 scaled by sqrt(N); N is floored at 1 so an
// unvisited node ranks children by prior.
double ExplorationFactor(int parent_visits, double c1, double c2);

// argmax_a Q(s,a) + P(a|s) U(s,a); unvisited children count as Q = 0 and ties
// go to the lowest index.
int SelectActionChild(std::span<const double> prior, std::span<const std::int32_t> visits,
                      std::span<const double> value_sum, const SearchConfig& config);
// Per Q-hat mode, or argmax p_k / (N_k + 1) for the quasirandom rule.
int SelectChanceChild(std::span<const double> prior, std::span<const std::int32_t> visits,
                      std::span<const double> value_sum, const SearchConfig& config);

// True iff the last `limit` entries of `codes` exist and are identical.
bool PureTerminalCheck(std::span<const int> codes, int limit);

struct TraceRecord {
  int simulation = 0;
  std::vector<int> nodes;      // node ids root..parent of leaf
  std::vector<int> keys;       // child key chosen at each node
  std::vector<double> returns; // return credited to each (node, key) edge
  double leaf_value = 0.0;
  bool terminal_leaf = false;
};

struct SearchResult {
  std::vector<int> visits;       // per action, illegal = 0
  std::vector<double> q;         // root Q per action, unvisited = 0
  std::vector<double> prior;     // root prior after masking
  int selected_action = -1;      // most visited
  std::vector<int> principal_variation;
  double root_value = 0.0;       // visit-weighted mean of root returns
  double raw_value = 0.0;        // v head at the root
  int nodes = 0;
  std::vector<TraceRecord> trace;
};

// One search tree in a flat arena. A Search is single-threaded: it belongs
// to the thread that created it and Run() refuses calls from any other
// thread. Run many Search objects in parallel over a shared const model.
class Search {
 public:
  Search(const SearchModel& model, SearchConfig config);
  Search(const Search&) = delete;
  Search& operator=(const Search&) = delete;

  SearchResult Run(const envs::Observation& root, const std::vector<bool>& legal, Rng& rng,
                   bool trace = false);

  // Arena view, valid until the next Run().
  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  NodeKind kind(int node) const { return nodes_[node].kind; }
  int num_children(int node) const { return nodes_[node].count; }
  int child_key(int node, int i) const { return keys_[nodes_[node].begin + i]; }
  int child_visits(int node, int i) const { return visits_[nodes_[node].begin + i]; }
  double child_value_sum(int node, int i) const { return value_sum_[nodes_[node].begin + i]; }
  int child_node(int node, int i) const { return child_[nodes_[node].begin + i]; }
  // Q_tree(s, b) = W / N when N > 0, else 0.
  double child_q(int node, int i) const;
  int visit_total(int node) const { return nodes_[node].visits; }

 private:
  struct Node {
    NodeKind kind = NodeKind::kAction;
    int hidden = 0;  // offset into hidden_
    int hidden_size = 0;
    int begin = 0;   // edge range
    int count = 0;
    int visits = 0;
    double value = 0.0;
    double reward = 0.0;
    int run_code = -1;    // code that created this node
    int run_length = 0;   // consecutive identical chance selections
    bool terminal = false;
  };

  int AddNode(NodeKind kind, const ModelOutput& out, std::span<const int> keys,
              std::span<const double> prior, int run_code, int run_length);
  NodeKind ChildKind(NodeKind parent, bool root) const;

  const SearchModel& model_;
  SearchConfig config_;
  std::thread::id owner_;
  std::vector<Node> nodes_;
  std::vector<double> hidden_;
  std::vector<int> keys_;
  std::vector<double> prior_;
  std::vector<std::int32_t> visits_;
  std::vector<double> value_sum_;
  std::vector<int> child_;
};

// Argmax: most visited, lowest id on ties. StochasticVisit: while
// move_number < move_cutoff, sample from {a : N(a) > threshold * N_max}
// proportionally to N(a).
int Act(const SearchResult& result, int move_number, const SearchConfig& config, Rng& rng);
// The distribution Act() samples from.
std::vector<double> ActingDistribution(const SearchResult& result, int move_number,
                                       const SearchConfig& config);

void WriteTrace(std::ostream& out, const SearchResult& result);
// One object per search: the logged simulations plus every edge of the final
// tree as {node, key, visits, value_sum, q}, so stored means can be audited
// against the logged returns.
nlohmann::json TraceJson(const SearchResult& result, const Search& search);

// Depth-2 model for tests: actions lead to chance nodes whose equiprobable
// codes lead to absorbing leaves valued payoff[a][k].
class TabularModel : public SearchModel {
 public:
  explicit TabularModel(std::vector<std::vector<double>> payoff);
  int num_actions() const override;
  int num_codes() const override;
  ModelOutput Root(const envs::Observation& observation) const override;
  ModelOutput Action(std::span<const double> hidden, int action) const override;
  ModelOutput Code(std::span<const double> hidden, int code) const override;

 private:
  ModelOutput Make(int state) const;
  std::vector<std::vector<double>> payoff_;
};

}  // namespace vqplan::mcts

#endif  // VQPLAN_MCTS_SEARCH_H_
