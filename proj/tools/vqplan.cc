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


// vqplan: dataset generation, two-stage training, matches and MBRE.
// Results are JSON on stdout; progress goes to stderr. Exit codes: 0 ok,
// 2 config error, 3 artifact mismatch, 4 runtime failure.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vqplan/cli/config.h"
#include "vqplan/cli/pipeline.h"
#include "vqplan/common/error.h"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitArtifact = 3;
constexpr int kExitRuntime = 4;

int Fail(const char* kind, int code, const std::string& message) {
  std::cout << nlohmann::json{{"ok", false},
                              {"error", {{"kind", kind}, {"message", message}}},
                              {"exit_code", code}}
                   .dump()
            << std::endl;
  std::cerr << "vqplan: " << kind << " error: " << message << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  using vqplan::cli::ExperimentConfig;
  CLI::App app{"vqplan: planning with discrete latent transition models"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int workers = 1;
  bool resume = false;
  bool trace = false;
  app.add_option("--config", config_path, "experiment config (JSON)")->required();
  app.add_option("--seed", seed, "overrides the config seed");
  app.add_option("--workers", workers, "worker thread cap")->check(CLI::Range(1, 1024));

  auto* gen = app.add_subcommand("gen-data", "generate the offline dataset");
  auto* train = app.add_subcommand("train", "train one stage");
  std::string stage;
  std::string train_model = "hybrid";
  train->add_option("--stage", stage, "codec | transition | baseline")->required();
  train->add_option("--model", train_model, "transition model name");
  train->add_flag("--resume", resume, "continue from the stage checkpoint");

  vqplan::cli::PlaySettings play;
  auto* play_cmd = app.add_subcommand("play", "play a match");
  auto* sweep_cmd = app.add_subcommand("budget-sweep", "play at several search budgets");
  std::vector<int> budgets;
  for (CLI::App* cmd : {play_cmd, sweep_cmd}) {
    cmd->add_option("--agent", play.agent, "mcts | qvalue | imitation | random");
    cmd->add_option("--model", play.model, "transition model name or 'baseline'");
    cmd->add_option("--games", play.games, "games to play");
    cmd->add_option("--mode", play.mode, "cooperative | neutral | adversarial");
    cmd->add_option("--label", play.label, "output directory name");
  }
  play_cmd->add_option("--budget", play.budget, "simulations per move");
  play_cmd->add_flag("--trace-search", trace, "log game 0's searches as JSONL");
  sweep_cmd->add_option("--budgets", budgets, "budgets (default eval.budgets)");

  vqplan::cli::MbreSettings mbre;
  auto* mbre_cmd = app.add_subcommand("eval-mbre", "minimum-over-samples rollout error");
  mbre_cmd->add_option("--model", mbre.model, "transition model name or 'baseline'");
  mbre_cmd->add_option("--k", mbre.k, "samples per ground truth");
  mbre_cmd->add_option("--horizon", mbre.horizon, "scored frames");
  mbre_cmd->add_option("--label", mbre.label, "output directory name");

  // Global options are accepted before or after the subcommand.
  for (CLI::App* cmd : {gen, train, play_cmd, sweep_cmd, mbre_cmd}) cmd->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return Fail("config", kExitConfig, e.what());
  }

  try {
    ExperimentConfig config = vqplan::cli::LoadConfig(config_path);
    if (seed) {
      config.seed = *seed;
      config.Validate();
    }
    vqplan::cli::RunOptions options;
    options.workers = workers;
    options.resume = resume;
    options.trace_search = trace;
    options.log = &std::cerr;
    nlohmann::json result;
    if (gen->parsed()) {
      result = vqplan::cli::GenData(config, options);
    } else if (train->parsed()) {
      result = vqplan::cli::Train(config, vqplan::cli::ParseStage(stage), train_model, options);
    } else if (play_cmd->parsed()) {
      result = vqplan::cli::Play(config, play, options);
    } else if (sweep_cmd->parsed()) {
      result = vqplan::cli::Sweep(config, play, budgets, options);
    } else if (mbre_cmd->parsed()) {
      result = vqplan::cli::EvalMbre(config, mbre, options);
    }
    std::cout << nlohmann::json{{"ok", true}, {"result", result}}.dump() << std::endl;
    return 0;
  } catch (const vqplan::ConfigError& e) {
    return Fail("config", kExitConfig, e.what());
  } catch (const vqplan::ArtifactMismatch& e) {
    return Fail("artifact", kExitArtifact, e.what());
  } catch (const std::exception& e) {
    return Fail("runtime", kExitRuntime, e.what());
  }
}
