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


#ifndef VQPLAN_CLI_PIPELINE_H_
#define VQPLAN_CLI_PIPELINE_H_

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vqplan/cli/config.h"
#include "vqplan/codec/codec.h"
#include "vqplan/envs/dataset.h"
#include "vqplan/eval/match.h"
#include "vqplan/eval/mbre.h"
#include "vqplan/transition/transition.h"

namespace vqplan::cli {

// Output layout under config.output_dir:
//   data/{train,valid}.jsonl, data/manifest.json
//   codec/, transition/<name>/, baseline/: checkpoint.bin, metrics.csv,
//     eval.json, manifest.json
//   play/<label>/, sweep/<label>/, mbre/<label>/
// Manifests record the stage hashes; the data manifest also carries the
// only wall-clock timestamp. Every other file is a pure function of the
// config and seed.
struct RunOptions {
  int workers = 1;
  bool resume = false;
  bool trace_search = false;
  // Stops training after this many checkpoint chunks as if interrupted,
  // leaving only the checkpoint; 0 runs to completion.
  int max_chunks = 0;
  std::ostream* log = nullptr;  // progress lines; null discards them
};

enum class Stage { kCodec, kTransition, kBaseline };
const char* StageName(Stage stage);
Stage ParseStage(const std::string& name);

// Stage results returned to the caller as JSON summaries.
nlohmann::json GenData(const ExperimentConfig& config, const RunOptions& options);
// `model` names the transition model for Stage::kTransition and is ignored
// otherwise. Training advances in chunks of checkpoint_every steps and
// writes a checkpoint after each; with options.resume an existing
// checkpoint of the same stage hash is continued.
nlohmann::json Train(const ExperimentConfig& config, Stage stage, const std::string& model,
                     const RunOptions& options);

struct PlaySettings {
  std::string agent = "mcts";
  std::string model = "hybrid";  // a models key, or "baseline"
  std::optional<int> games;      // default eval.games
  std::optional<int> budget;     // default search.budget
  std::optional<std::string> mode;
  std::string label;  // default derived from the settings
};
nlohmann::json Play(const ExperimentConfig& config, const PlaySettings& play,
                    const RunOptions& options);
// Plays at every eval.budgets entry (or `budgets` when nonempty).
nlohmann::json Sweep(const ExperimentConfig& config, const PlaySettings& play,
                     const std::vector<int>& budgets, const RunOptions& options);

struct MbreSettings {
  std::string model = "hybrid";  // a models key, or "baseline"
  std::optional<int> k;
  std::optional<int> horizon;
  std::string label;
};
// CSV columns: horizon,mbre_cumulative,mbre_target,k,seed.
nlohmann::json EvalMbre(const ExperimentConfig& config, const MbreSettings& mbre,
                        const RunOptions& options);

// Artifact access with hash validation; ArtifactMismatch names both hashes
// on a mismatch and the missing stage otherwise.
struct LoadedData {
  std::vector<envs::Trajectory> train;
  std::vector<envs::Trajectory> valid;
};
LoadedData LoadData(const ExperimentConfig& config);
codec::StateCodec LoadCodec(const ExperimentConfig& config);
transition::TransitionModel LoadModel(const ExperimentConfig& config, const std::string& name,
                                      const codec::StateCodec* codec);
transition::TransitionModel LoadBaseline(const ExperimentConfig& config);
eval::FramePredictor LoadFramePredictor(const ExperimentConfig& config);

std::string StageDir(const ExperimentConfig& config, Stage stage, const std::string& model);

}  // namespace vqplan::cli

#endif  // VQPLAN_CLI_PIPELINE_H_
