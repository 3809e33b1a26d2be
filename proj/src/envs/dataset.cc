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

#include "vqplan/envs/dataset.h"

#include <fstream>
#include <sstream>
#include <thread>

#include "vqplan/common/error.h"
#include "vqplan/common/hash.h"
#include "vqplan/envs/blindmatch.h"

namespace vqplan::envs {

double Trajectory::total_reward() const {
  double total = 0.0;
  for (double r : rewards) total += r;
  return total;
}

Trajectory PlayEpisode(Environment& env, const BehaviorPolicy& behavior, Rng& rng,
                       std::int64_t episode_id) {
  Trajectory traj;
  traj.episode_id = episode_id;
  traj.skill = behavior.SampleSkill(rng);
  traj.observations.push_back(env.Reset(rng, episode_id));
  while (!env.done()) {
    const int action = behavior.Act(env, traj.skill, rng);
    EnvStep step = env.Step(action, rng);
    traj.actions.push_back(action);
    traj.rewards.push_back(step.reward);
    traj.observations.push_back(std::move(step.observation));
  }
  return traj;
}

std::vector<Trajectory> GenerateEpisodes(const EnvConfig& env_config,
                                         const BehaviorConfig& behavior_config,
                                         std::int64_t count, std::uint64_t seed, int workers) {
  if (count < 1) throw ConfigError("n_episodes must be >= 1");
  const BehaviorPolicy behavior(behavior_config);
  std::vector<Trajectory> out(count);
  std::shared_ptr<const TicTacToeOracle> oracle;
  if (env_config.name == "blindmatch") {
    oracle = std::make_shared<const TicTacToeOracle>(env_config.opponent);
  }
  const Rng root(seed);
  auto work = [&](int worker, int stride) {
    std::unique_ptr<Environment> env =
        oracle ? std::make_unique<BlindMatch>(oracle, env_config.start)
               : MakeEnvironment(env_config);
    for (std::int64_t i = worker; i < count; i += stride) {
      Rng rng = root.Split(static_cast<std::uint64_t>(i));
      out[i] = PlayEpisode(*env, behavior, rng, i);
    }
  };
  workers = std::max(1, workers);
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w) threads.emplace_back(work, w, workers);
    for (auto& t : threads) t.join();
  }
  return out;
}

bool IsValidationEpisode(std::int64_t episode_id, double validation_fraction) {
  const std::string key = "episode:" + std::to_string(episode_id);
  const double u = static_cast<double>(Fnv1a64(key) % 1000000) / 1e6;
  return u < validation_fraction;
}

std::string SerializeTrajectories(const DatasetHeader& header,
                                  std::span<const Trajectory> episodes) {
  std::ostringstream out;
  nlohmann::json h = {{"format", DatasetHeader::kFormat},
                      {"version", DatasetHeader::kVersion},
                      {"env", header.env},
                      {"seed", header.seed},
                      {"config_hash", header.config_hash},
                      {"split", header.split},
                      {"episodes", static_cast<std::int64_t>(episodes.size())}};
  out << h.dump() << '\n';
  for (const Trajectory& traj : episodes) {
    const int T = traj.length();
    for (int t = 0; t < T; ++t) {
      const bool last = t == T - 1;
      nlohmann::json r = {{"episode_id", traj.episode_id},
                          {"t", t},
                          {"observation", traj.observations[t]},
                          {"action", last ? -1 : traj.actions[t]},
                          {"reward", last ? 0.0 : traj.rewards[t]},
                          {"done", last}};
      if (t == 0) r["skill"] = traj.skill;
      out << r.dump() << '\n';
    }
  }
  return out.str();
}

void WriteTrajectories(const std::string& path, const DatasetHeader& header,
                       std::span<const Trajectory> episodes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << SerializeTrajectories(header, episodes);
  if (!out) throw std::runtime_error("short write to " + path);
}

Dataset ReadTrajectories(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactMismatch("cannot open trajectory file " + path);
  Dataset data;
  std::string line;
  if (!std::getline(in, line)) throw ArtifactMismatch(path + " is empty");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw ArtifactMismatch(path + " has no trajectory header");
  }
  if (h.value("format", "") != DatasetHeader::kFormat ||
      h.value("version", 0) != DatasetHeader::kVersion) {
    throw ArtifactMismatch(path + " is not a supported trajectory file");
  }
  data.header.env = h.at("env");
  data.header.seed = h.at("seed").get<std::uint64_t>();
  data.header.config_hash = h.at("config_hash").get<std::string>();
  data.header.split = h.at("split").get<std::string>();
  data.header.episodes = h.at("episodes").get<std::int64_t>();
  Trajectory current;
  bool open = false;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json r;
    try {
      r = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw ArtifactMismatch(path + ":" + std::to_string(line_no) + ": malformed record");
    }
    const auto id = r.at("episode_id").get<std::int64_t>();
    const int t = r.at("t").get<int>();
    if (!open) {
      current = Trajectory{};
      current.episode_id = id;
      current.skill = r.value("skill", 0.0);
      open = true;
    }
    if (id != current.episode_id || t != current.length()) {
      throw ArtifactMismatch(path + ":" + std::to_string(line_no) + ": records out of order");
    }
    current.observations.push_back(r.at("observation").get<Observation>());
    if (r.at("done").get<bool>()) {
      data.episodes.push_back(std::move(current));
      open = false;
    } else {
      current.actions.push_back(r.at("action").get<int>());
      current.rewards.push_back(r.at("reward").get<double>());
    }
  }
  if (open) throw ArtifactMismatch(path + ": last episode is incomplete");
  if (static_cast<std::int64_t>(data.episodes.size()) != data.header.episodes) {
    throw ArtifactMismatch(path + ": header promises " + std::to_string(data.header.episodes) +
                           " episodes");
  }
  return data;
}

}  // namespace vqplan::envs
