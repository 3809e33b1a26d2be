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


#include "vqplan/mcts/search.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vqplan/common/error.h"
#include "vqplan/common/strict_json.h"
#include "vqplan/kernels/kernels.h"

namespace vqplan::mcts {

const char* ChanceModeName(ChanceMode m) {
  switch (m) {
    case ChanceMode::kCooperative: return "cooperative";
    case ChanceMode::kNeutral: return "neutral";
    case ChanceMode::kAdversarial: return "adversarial";
  }
  return "?";
}

ChanceMode ParseChanceMode(const std::string& s) {
  if (s == "cooperative") return ChanceMode::kCooperative;
  if (s == "neutral") return ChanceMode::kNeutral;
  if (s == "adversarial") return ChanceMode::kAdversarial;
  throw ConfigError("chance_mode: unknown value '" + s + "'");
}

const char* TreeShapeName(TreeShape s) {
  switch (s) {
    case TreeShape::kHybrid: return "hybrid";
    case TreeShape::kPure: return "pure";
    case TreeShape::kActionsOnly: return "actions_only";
  }
  return "?";
}

TreeShape ParseTreeShape(const std::string& s) {
  if (s == "hybrid") return TreeShape::kHybrid;
  if (s == "pure") return TreeShape::kPure;
  if (s == "actions_only") return TreeShape::kActionsOnly;
  throw ConfigError("shape: unknown value '" + s + "'");
}

void SearchConfig::Validate() const {
  if (budget < 1) throw ConfigError("search.budget: must be >= 1");
  if (!(c1 >= 0.0)) throw ConfigError("search.c1: must be >= 0");
  if (!(c2 > 0.0)) throw ConfigError("search.c2: must be > 0");
  if (!(discount > 0.0 && discount <= 1.0)) throw ConfigError("search.discount: must be in (0, 1]");
  if (chance_rule == ChanceRule::kQuasirandom && chance_mode != ChanceMode::kNeutral) {
    throw ConfigError("search.chance_rule: quasirandom selection requires neutral chance_mode");
  }
  if (!(noise_alpha > 0.0)) throw ConfigError("search.noise_alpha: must be > 0");
  if (!(noise_fraction >= 0.0 && noise_fraction <= 1.0)) {
    throw ConfigError("search.noise_fraction: must be in [0, 1]");
  }
  if (pure_repeat_limit < 1) throw ConfigError("search.pure_repeat_limit: must be >= 1");
  if (!(visit_threshold >= 0.0 && visit_threshold < 1.0)) {
    throw ConfigError("search.visit_threshold: must be in [0, 1)");
  }
  if (move_cutoff < 0) throw ConfigError("search.move_cutoff: must be >= 0");
}

nlohmann::json SearchConfig::ToJson() const {
  return {{"budget", budget},
          {"c1", c1},
          {"c2", c2},
          {"discount", discount},
          {"chance_mode", ChanceModeName(chance_mode)},
          {"chance_rule", chance_rule == ChanceRule::kUcb ? "ucb" : "quasirandom"},
          {"root_noise", root_noise},
          {"noise_alpha", noise_alpha},
          {"noise_fraction", noise_fraction},
          {"pure_repeat_limit", pure_repeat_limit},
          {"act_rule", act_rule == ActRule::kArgmax ? "argmax" : "stochastic_visit"},
          {"visit_threshold", visit_threshold},
          {"move_cutoff", move_cutoff},
          {"shape", TreeShapeName(shape)}};
}

SearchConfig SearchConfig::FromJson(const nlohmann::json& j) {
  SearchConfig c;
  StrictObject o(j, "search");
  o.Get("budget", c.budget);
  o.Get("c1", c.c1);
  o.Get("c2", c.c2);
  o.Get("discount", c.discount);
  std::string s;
  if (o.Has("chance_mode") && (o.Get("chance_mode", s), true)) c.chance_mode = ParseChanceMode(s);
  if (o.Has("chance_rule") && (o.Get("chance_rule", s), true)) {
    if (s == "ucb") {
      c.chance_rule = ChanceRule::kUcb;
    } else if (s == "quasirandom") {
      c.chance_rule = ChanceRule::kQuasirandom;
    } else {
      throw ConfigError("search.chance_rule: unknown value '" + s + "'");
    }
  }
  o.Get("root_noise", c.root_noise);
  o.Get("noise_alpha", c.noise_alpha);
  o.Get("noise_fraction", c.noise_fraction);
  o.Get("pure_repeat_limit", c.pure_repeat_limit);
  if (o.Has("act_rule") && (o.Get("act_rule", s), true)) {
    if (s == "argmax") {
      c.act_rule = ActRule::kArgmax;
    } else if (s == "stochastic_visit") {
      c.act_rule = ActRule::kStochasticVisit;
    } else {
      throw ConfigError("search.act_rule: unknown value '" + s + "'");
    }
  }
  o.Get("visit_threshold", c.visit_threshold);
  o.Get("move_cutoff", c.move_cutoff);
  if (o.Has("shape") && (o.Get("shape", s), true)) c.shape = ParseTreeShape(s);
  o.Finish();
  c.Validate();
  return c;
}

double ExplorationFactor(int parent_visits, double c1, double c2) {
  const double n = static_cast<double>(std::max(parent_visits, 1));
  return std::sqrt(n) * (c1 + std::log((static_cast<double>(parent_visits) + c2 + 1.0) / c2));
}

namespace {

int TotalVisits(std::span<const std::int32_t> visits) {
  int total = 0;
  for (std::int32_t v : visits) total += v;
  return total;
}

void CheckEdges(std::span<const double> prior, std::span<const std::int32_t> visits,
                std::span<const double> value_sum) {
  if (prior.empty() || prior.size() != visits.size() || prior.size() != value_sum.size()) {
    throw DimensionError("selection: prior, visits and value_sum must be equal and non-empty");
  }
}

}  // namespace

int SelectActionChild(std::span<const double> prior, std::span<const std::int32_t> visits,
                      std::span<const double> value_sum, const SearchConfig& config) {
  CheckEdges(prior, visits, value_sum);
  const double factor = ExplorationFactor(TotalVisits(visits), config.c1, config.c2);
  return kernels::Active().puct_argmax(prior.data(), visits.data(), value_sum.data(),
                                       static_cast<int>(prior.size()), 1.0, factor);
}

int SelectChanceChild(std::span<const double> prior, std::span<const std::int32_t> visits,
                      std::span<const double> value_sum, const SearchConfig& config) {
  CheckEdges(prior, visits, value_sum);
  const int n = static_cast<int>(prior.size());
  if (config.chance_rule == ChanceRule::kQuasirandom) {
    return kernels::Active().puct_argmax(prior.data(), visits.data(), value_sum.data(), n, 0.0,
                                         1.0);
  }
  double q_weight = 0.0;
  if (config.chance_mode == ChanceMode::kCooperative) q_weight = 1.0;
  if (config.chance_mode == ChanceMode::kAdversarial) q_weight = -1.0;
  const double factor = ExplorationFactor(TotalVisits(visits), config.c1, config.c2);
  return kernels::Active().puct_argmax(prior.data(), visits.data(), value_sum.data(), n, q_weight,
                                       factor);
}

bool PureTerminalCheck(std::span<const int> codes, int limit) {
  VQPLAN_CHECK(limit >= 1, "PureTerminalCheck: limit must be >= 1");
  if (static_cast<int>(codes.size()) < limit) return false;
  const int last = codes.back();
  for (int i = static_cast<int>(codes.size()) - limit; i < static_cast<int>(codes.size()); ++i) {
    if (codes[i] != last) return false;
  }
  return true;
}

Search::Search(const SearchModel& model, SearchConfig config)
    : model_(model), config_(config), owner_(std::this_thread::get_id()) {
  config_.Validate();
  if (config_.shape != TreeShape::kActionsOnly && model_.num_codes() < 1) {
    throw ConfigError("search.shape: tree with chance nodes needs a model with codes");
  }
}

double Search::child_q(int node, int i) const {
  const int e = nodes_[node].begin + i;
  return visits_[e] > 0 ? value_sum_[e] / visits_[e] : 0.0;
}

NodeKind Search::ChildKind(NodeKind parent, bool root) const {
  switch (config_.shape) {
    case TreeShape::kActionsOnly: return NodeKind::kAction;
    case TreeShape::kHybrid:
      return parent == NodeKind::kAction ? NodeKind::kChance : NodeKind::kAction;
    case TreeShape::kPure:
      (void)root;
      return NodeKind::kChance;
  }
  return NodeKind::kAction;
}

int Search::AddNode(NodeKind kind, const ModelOutput& out, std::span<const int> keys,
                    std::span<const double> prior, int run_code, int run_length) {
  Node node;
  node.kind = kind;
  node.hidden = static_cast<int>(hidden_.size());
  node.hidden_size = static_cast<int>(out.hidden.size());
  node.begin = static_cast<int>(keys_.size());
  node.count = static_cast<int>(keys.size());
  node.value = out.value;
  node.reward = out.reward;
  node.run_code = run_code;
  node.run_length = run_length;
  node.terminal = config_.shape == TreeShape::kPure && run_length >= config_.pure_repeat_limit;
  hidden_.insert(hidden_.end(), out.hidden.begin(), out.hidden.end());
  keys_.insert(keys_.end(), keys.begin(), keys.end());
  prior_.insert(prior_.end(), prior.begin(), prior.end());
  visits_.insert(visits_.end(), keys.size(), 0);
  value_sum_.insert(value_sum_.end(), keys.size(), 0.0);
  child_.insert(child_.end(), keys.size(), -1);
  nodes_.push_back(node);
  return static_cast<int>(nodes_.size()) - 1;
}

namespace {

// Children of an interior node: every key, priors from the matching head.
void InteriorChildren(NodeKind kind, const ModelOutput& out, int num_actions, int num_codes,
                      std::vector<int>& keys, std::vector<double>& prior) {
  const int n = kind == NodeKind::kAction ? num_actions : num_codes;
  const std::vector<double>& p = kind == NodeKind::kAction ? out.policy : out.code_policy;
  if (static_cast<int>(p.size()) != n) {
    throw DimensionError("search: model policy width does not match the node kind");
  }
  keys.resize(n);
  for (int i = 0; i < n; ++i) keys[i] = i;
  prior.assign(p.begin(), p.end());
}

}  // namespace

SearchResult Search::Run(const envs::Observation& root, const std::vector<bool>& legal, Rng& rng,
                         bool trace) {
  if (std::this_thread::get_id() != owner_) {
    throw ContractError("Search::Run: a Search belongs to the thread that created it");
  }
  const int num_actions = model_.num_actions();
  const int num_codes = model_.num_codes();
  if (static_cast<int>(legal.size()) != num_actions) {
    throw DimensionError("Search::Run: legal mask width must equal the action count");
  }
  nodes_.clear();
  hidden_.clear();
  keys_.clear();
  prior_.clear();
  visits_.clear();
  value_sum_.clear();
  child_.clear();

  // Root: legal actions only, prior renormalized over them.
  const ModelOutput root_out = model_.Root(root);
  if (static_cast<int>(root_out.policy.size()) != num_actions) {
    throw DimensionError("Search::Run: root policy width does not match the action count");
  }
  std::vector<int> keys;
  std::vector<double> prior;
  double mass = 0.0;
  for (int a = 0; a < num_actions; ++a) {
    if (!legal[a]) continue;
    keys.push_back(a);
    prior.push_back(root_out.policy[a]);
    mass += root_out.policy[a];
  }
  if (keys.empty()) throw ContractError("Search::Run: no legal action at the root");
  for (double& p : prior) p = mass > 0.0 ? p / mass : 1.0 / static_cast<double>(keys.size());
  if (config_.root_noise) {
    const std::vector<double> noise =
        rng.Dirichlet(static_cast<int>(keys.size()), config_.noise_alpha);
    for (std::size_t i = 0; i < prior.size(); ++i) {
      prior[i] = (1.0 - config_.noise_fraction) * prior[i] + config_.noise_fraction * noise[i];
    }
  }
  AddNode(NodeKind::kAction, root_out, keys, prior, -1, 0);

  SearchResult result;
  std::vector<int> path_nodes;
  std::vector<int> path_edges;
  for (int sim = 0; sim < config_.budget; ++sim) {
    path_nodes.clear();
    path_edges.clear();
    int node = 0;
    double leaf_value = 0.0;
    bool terminal_leaf = false;
    while (true) {
      const Node& cur = nodes_[node];
      if (cur.terminal) {
        leaf_value = cur.value;
        terminal_leaf = true;
        break;
      }
      const std::span<const double> p(prior_.data() + cur.begin, cur.count);
      const std::span<const std::int32_t> n(visits_.data() + cur.begin, cur.count);
      const std::span<const double> w(value_sum_.data() + cur.begin, cur.count);
      const int i = cur.kind == NodeKind::kAction ? SelectActionChild(p, n, w, config_)
                                                  : SelectChanceChild(p, n, w, config_);
      const int edge = cur.begin + i;
      path_nodes.push_back(node);
      path_edges.push_back(edge);
      if (child_[edge] >= 0) {
        node = child_[edge];
        continue;
      }
      // Expand: query the model from the parent hidden state.
      const std::vector<double> parent_hidden(hidden_.begin() + cur.hidden,
                                              hidden_.begin() + cur.hidden + cur.hidden_size);
      const NodeKind parent_kind = cur.kind;
      const int key = keys_[edge];
      ModelOutput out = parent_kind == NodeKind::kAction ? model_.Action(parent_hidden, key)
                                                         : model_.Code(parent_hidden, key);
      int run_code = -1;
      int run_length = 0;
      if (parent_kind == NodeKind::kChance) {
        const Node& parent = nodes_[node];
        run_code = key;
        run_length = parent.run_code == key ? parent.run_length + 1 : 1;
      }
      const NodeKind kind = ChildKind(parent_kind, node == 0);
      InteriorChildren(kind, out, num_actions, num_codes, keys, prior);
      const int child = AddNode(kind, out, keys, prior, run_code, run_length);
      child_[edge] = child;
      leaf_value = out.value;
      terminal_leaf = nodes_[child].terminal;
      break;
    }

    // Backup: G = r + gamma G along the path, credited to each edge.
    TraceRecord record;
    if (trace) {
      record.simulation = sim;
      record.leaf_value = leaf_value;
      record.terminal_leaf = terminal_leaf;
      record.nodes = path_nodes;
      record.returns.resize(path_edges.size());
      for (int e : path_edges) record.keys.push_back(keys_[e]);
    }
    double g = leaf_value;
    for (int k = static_cast<int>(path_edges.size()) - 1; k >= 0; --k) {
      const int e = path_edges[k];
      g = nodes_[child_[e]].reward + config_.discount * g;
      visits_[e] += 1;
      value_sum_[e] += g;
      nodes_[path_nodes[k]].visits += 1;
      if (trace) record.returns[k] = g;
    }
    if (trace) result.trace.push_back(std::move(record));
  }

  const Node& r = nodes_[0];
  result.visits.assign(num_actions, 0);
  result.q.assign(num_actions, 0.0);
  result.prior.assign(num_actions, 0.0);
  double w_total = 0.0;
  int n_total = 0;
  for (int i = 0; i < r.count; ++i) {
    const int e = r.begin + i;
    result.visits[keys_[e]] = visits_[e];
    result.q[keys_[e]] = child_q(0, i);
    result.prior[keys_[e]] = prior_[e];
    w_total += value_sum_[e];
    n_total += visits_[e];
  }
  result.root_value = n_total > 0 ? w_total / n_total : root_out.value;
  result.raw_value = root_out.value;
  int best = -1;
  for (int i = 0; i < r.count; ++i) {
    if (best < 0 || visits_[r.begin + i] > visits_[r.begin + best]) best = i;
  }
  result.selected_action = keys_[r.begin + best];
  int node = 0;
  while (node >= 0 && nodes_[node].count > 0) {
    const Node& cur = nodes_[node];
    int top = -1;
    for (int i = 0; i < cur.count; ++i) {
      const int v = visits_[cur.begin + i];
      if (v > 0 && (top < 0 || v > visits_[cur.begin + top])) top = i;
    }
    if (top < 0) break;
    result.principal_variation.push_back(keys_[cur.begin + top]);
    node = child_[cur.begin + top];
  }
  result.nodes = num_nodes();
  return result;
}

std::vector<double> ActingDistribution(const SearchResult& result, int move_number,
                                       const SearchConfig& config) {
  const int n = static_cast<int>(result.visits.size());
  std::vector<double> dist(n, 0.0);
  int n_max = 0;
  int best = 0;
  for (int a = 0; a < n; ++a) {
    if (result.visits[a] > n_max) {
      n_max = result.visits[a];
      best = a;
    }
  }
  if (config.act_rule == ActRule::kArgmax || move_number >= config.move_cutoff || n_max == 0) {
    dist[best] = 1.0;
    return dist;
  }
  double total = 0.0;
  for (int a = 0; a < n; ++a) {
    if (result.visits[a] > config.visit_threshold * n_max) {
      dist[a] = result.visits[a];
      total += dist[a];
    }
  }
  for (double& d : dist) d /= total;
  return dist;
}

int Act(const SearchResult& result, int move_number, const SearchConfig& config, Rng& rng) {
  VQPLAN_CHECK(!result.visits.empty(), "Act: empty search result");
  const std::vector<double> dist = ActingDistribution(result, move_number, config);
  if (config.act_rule == ActRule::kArgmax || move_number >= config.move_cutoff) {
    return static_cast<int>(std::max_element(dist.begin(), dist.end()) - dist.begin());
  }
  return rng.Categorical(dist);
}

void WriteTrace(std::ostream& out, const SearchResult& result) {
  for (const TraceRecord& r : result.trace) {
    nlohmann::json j = {{"simulation", r.simulation}, {"nodes", r.nodes},
                        {"keys", r.keys},             {"returns", r.returns},
                        {"leaf_value", r.leaf_value}, {"terminal_leaf", r.terminal_leaf}};
    out << j.dump() << '\n';
  }
}

nlohmann::json TraceJson(const SearchResult& result, const Search& search) {
  nlohmann::json sims = nlohmann::json::array();
  for (const TraceRecord& r : result.trace) {
    sims.push_back({{"simulation", r.simulation}, {"nodes", r.nodes},
                    {"keys", r.keys},             {"returns", r.returns},
                    {"leaf_value", r.leaf_value}, {"terminal_leaf", r.terminal_leaf}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (int n = 0; n < search.num_nodes(); ++n) {
    for (int i = 0; i < search.num_children(n); ++i) {
      if (search.child_visits(n, i) == 0) continue;
      edges.push_back({{"node", n},
                       {"key", search.child_key(n, i)},
                       {"visits", search.child_visits(n, i)},
                       {"value_sum", search.child_value_sum(n, i)},
                       {"q", search.child_q(n, i)}});
    }
  }
  return {{"simulations", sims}, {"edges", edges}};
}

// States: 0 root, 1 + a chance node after action a, 3 + 2a + k leaf.
TabularModel::TabularModel(std::vector<std::vector<double>> payoff) : payoff_(std::move(payoff)) {
  VQPLAN_CHECK(payoff_.size() == 2 && payoff_[0].size() == 2 && payoff_[1].size() == 2,
               "TabularModel: payoff must be 2x2");
}

int TabularModel::num_actions() const { return 2; }
int TabularModel::num_codes() const { return 2; }

ModelOutput TabularModel::Make(int state) const {
  ModelOutput out;
  out.hidden = {static_cast<double>(state)};
  out.policy = {0.5, 0.5};
  out.code_policy = {0.5, 0.5};
  out.value = state >= 3 ? payoff_[(state - 3) / 2][(state - 3) % 2] : 0.0;
  out.reward = 0.0;
  return out;
}

ModelOutput TabularModel::Root(const envs::Observation&) const { return Make(0); }

ModelOutput TabularModel::Action(std::span<const double> hidden, int action) const {
  VQPLAN_CHECK(hidden.size() == 1 && action >= 0 && action < 2, "TabularModel: bad action");
  const int state = static_cast<int>(hidden[0]);
  return Make(state == 0 ? 1 + action : state);
}

ModelOutput TabularModel::Code(std::span<const double> hidden, int code) const {
  VQPLAN_CHECK(hidden.size() == 1 && code >= 0 && code < 2, "TabularModel: bad code");
  const int state = static_cast<int>(hidden[0]);
  return Make(state == 1 || state == 2 ? 3 + 2 * (state - 1) + code : state);
}

}  // namespace vqplan::mcts
