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


#include "vqplan/cli/pipeline.h"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "vqplan/common/error.h"
#include "vqplan/common/hash.h"
#include "vqplan/eval/stats.h"
#include "vqplan/numerics/checkpoint.h"

namespace vqplan::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestSchema = "vqplan-stage";
constexpr int kManifestVersion = 1;
constexpr const char* kTwoStageRule =
    "two-stage training: the state codec is trained first and frozen, then the transition "
    "model is trained on its codes";

void Log(const RunOptions& o, const std::string& line) {
  if (o.log != nullptr) *o.log << line << '\n' << std::flush;
}

std::string Num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactMismatch("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes through a temporary so an interrupted run never leaves a torn file.
void WriteFile(const std::string& path, const std::string& content) {
  fs::create_directories(fs::path(path).parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + tmp + "'");
  }
  fs::rename(tmp, path);
}

void WriteJson(const std::string& path, const nlohmann::json& j) {
  WriteFile(path, j.dump(2) + "\n");
}

std::string FileHash(const std::string& path) { return HashHex(ReadFile(path)); }

nlohmann::json ReadManifest(const std::string& path, const std::string& missing) {
  if (!fs::exists(path)) throw ArtifactMismatch(missing);
  nlohmann::json j = nlohmann::json::parse(ReadFile(path), nullptr, false);
  if (j.is_discarded() || !j.is_object() || j.value("schema", "") != kManifestSchema) {
    throw ArtifactMismatch("'" + path + "' is not a vqplan manifest");
  }
  return j;
}

void CheckHash(const std::string& what, const std::string& artifact, const std::string& config) {
  if (artifact != config) {
    throw ArtifactMismatch(what + ": hash mismatch (artifact " + artifact + ", config " + config +
                           "); rerun the stage or restore the matching config");
  }
}

void CheckFileHash(const nlohmann::json& manifest, const std::string& dir,
                   const std::string& file) {
  const std::string recorded = manifest.at("files").at(file).get<std::string>();
  CheckHash(dir + "/" + file, FileHash(dir + "/" + file), recorded);
}

std::string DataDir(const ExperimentConfig& c) { return c.output_dir + "/data"; }

numerics::AdamConfig Adam(const TrainSettings& t) { return t.adam; }

// Keeps rows at step 1, multiples of log_every and the final step, so the
// curve does not depend on where chunk boundaries fell.
template <typename Row>
void AppendRows(std::vector<Row>& out, const std::vector<Row>& rows, int log_every,
                std::int64_t total) {
  for (const Row& r : rows) {
    if (r.step == 1 || r.step % log_every == 0 || r.step == total) {
      if (out.empty() || out.back().step < r.step) out.push_back(r);
    }
  }
}

// Chunk targets: step + chunk, capped at total; a zero chunk runs to total.
std::int64_t NextTarget(std::int64_t step, std::int64_t total, int chunk) {
  if (chunk <= 0) return total;
  return std::min(total, step + chunk);
}

nlohmann::json CodecRowJson(const codec::CodecLogRow& r) {
  return {r.step, r.loss, r.reconstruction, r.commitment, r.action_reconstruction, r.accuracy};
}
codec::CodecLogRow CodecRowFrom(const nlohmann::json& j) {
  return {j[0].get<std::int64_t>(), j[1].get<double>(), j[2].get<double>(),
          j[3].get<double>(),       j[4].get<double>(), j[5].get<double>()};
}
nlohmann::json TransitionRowJson(const transition::TransitionLogRow& r) {
  return {r.step, r.total, r.policy, r.code, r.value, r.reward};
}
transition::TransitionLogRow TransitionRowFrom(const nlohmann::json& j) {
  return {j[0].get<std::int64_t>(), j[1].get<double>(), j[2].get<double>(),
          j[3].get<double>(),       j[4].get<double>(), j[5].get<double>()};
}
nlohmann::json FrameRowJson(const eval::FrameLogRow& r) { return {r.step, r.loss}; }
eval::FrameLogRow FrameRowFrom(const nlohmann::json& j) {
  return {j[0].get<std::int64_t>(), j[1].get<double>()};
}

template <typename Row>
nlohmann::json RowsJson(const std::vector<Row>& rows,
                        const std::function<nlohmann::json(const Row&)>& f) {
  nlohmann::json a = nlohmann::json::array();
  for (const Row& r : rows) a.push_back(f(r));
  return a;
}

template <typename Row>
std::vector<Row> RowsFrom(const nlohmann::json& a,
                          const std::function<Row(const nlohmann::json&)>& f) {
  std::vector<Row> out;
  for (const auto& j : a) out.push_back(f(j));
  return out;
}

std::string CodecCsv(const std::vector<codec::CodecLogRow>& rows) {
  std::string s = "step,loss,reconstruction,commitment,action_reconstruction,accuracy\n";
  for (const auto& r : rows) {
    s += std::to_string(r.step) + "," + Num(r.loss) + "," + Num(r.reconstruction) + "," +
         Num(r.commitment) + "," + Num(r.action_reconstruction) + "," + Num(r.accuracy) + "\n";
  }
  return s;
}

std::string TransitionCsv(const std::vector<transition::TransitionLogRow>& rows) {
  std::string s = "step,total,policy,code,value,reward\n";
  for (const auto& r : rows) {
    s += std::to_string(r.step) + "," + Num(r.total) + "," + Num(r.policy) + "," +
         Num(r.code) + "," + Num(r.value) + "," + Num(r.reward) + "\n";
  }
  return s;
}

std::string FrameCsv(const std::vector<eval::FrameLogRow>& rows) {
  std::string s = "step,loss\n";
  for (const auto& r : rows) s += std::to_string(r.step) + "," + Num(r.loss) + "\n";
  return s;
}

nlohmann::json StageManifest(const std::string& stage, const std::string& hash,
                             const ExperimentConfig& c) {
  return {{"schema", kManifestSchema},
          {"version", kManifestVersion},
          {"stage", stage},
          {"hash", hash},
          {"data_hash", c.DataHash()},
          {"config_hash", c.Hash()}};
}

// Reads the resume checkpoint when asked and present; it must carry the
// current stage hash.
std::optional<numerics::Checkpoint> ResumePoint(const std::string& path, const std::string& hash,
                                                const RunOptions& o) {
  if (!o.resume || !fs::exists(path)) return std::nullopt;
  numerics::Checkpoint ckpt = numerics::Checkpoint::Read(path);
  CheckHash("resume checkpoint '" + path + "'", ckpt.meta().value("stage_hash", ""), hash);
  return ckpt;
}

codec::StateCodec TrainCodecStage(const ExperimentConfig& c, const LoadedData& data,
                                  const RunOptions& o, nlohmann::json& summary) {
  const std::string dir = StageDir(c, Stage::kCodec, "");
  const std::string ckpt_path = dir + "/checkpoint.bin";
  const std::string hash = c.CodecHash();
  const TrainSettings& t = c.codec_train;
  codec::StateCodec codec(c.codec, codec::ShapeOf(c.env), DeriveSeed(c.seed, "codec/init"));
  std::vector<codec::CodecLogRow> rows;
  int restarts = 0;
  if (auto ckpt = ResumePoint(ckpt_path, hash, o)) {
    codec = codec::StateCodec::Load(*ckpt);
    rows = RowsFrom<codec::CodecLogRow>(ckpt->meta()["progress"]["metrics"], CodecRowFrom);
    restarts = ckpt->meta()["progress"]["restarts"].get<int>();
    Log(o, "codec: resuming at step " + std::to_string(codec.params().step()));
  }
  codec::CodecTrainOptions opt;
  opt.batch = t.batch;
  opt.adam = Adam(t);
  opt.seed = DeriveSeed(c.seed, "codec/train");
  opt.log_every = t.log_every;
  opt.restart_every = t.restart_every;
  opt.restart_threshold = t.restart_threshold;
  codec::CodecReport report;
  bool first = true;
  int chunks = 0;
  while (first || codec.params().step() < t.steps) {
    if (o.max_chunks > 0 && chunks++ == o.max_chunks) {
      summary = {{"stage", "codec"}, {"interrupted", true}, {"step", codec.params().step()}};
      return codec;
    }
    first = false;
    opt.steps = NextTarget(codec.params().step(), t.steps, t.checkpoint_every);
    report = codec::TrainCodec(codec, data.train, opt);
    AppendRows(rows, report.curve, t.log_every, t.steps);
    restarts += report.restarts;
    numerics::Checkpoint ckpt;
    codec.Save(ckpt);
    ckpt.meta()["stage_hash"] = hash;
    ckpt.meta()["progress"] = {{"metrics", RowsJson<codec::CodecLogRow>(rows, CodecRowJson)},
                               {"restarts", restarts}};
    fs::create_directories(dir);
    ckpt.Write(ckpt_path + ".tmp");
    fs::rename(ckpt_path + ".tmp", ckpt_path);
    Log(o, "codec: step " + std::to_string(codec.params().step()) + "/" +
               std::to_string(t.steps) +
               (rows.empty() ? "" : " loss " + Num(rows.back().loss)));
  }
  WriteFile(dir + "/metrics.csv", CodecCsv(rows));
  const codec::CodecEvaluation ev = codec::EvaluateCodec(codec, data.valid, 5000);
  nlohmann::json eval = {{"hash", hash},
                         {"cell_accuracy", ev.cell_accuracy},
                         {"observation_accuracy", ev.observation_accuracy},
                         {"action_accuracy", ev.action_accuracy},
                         {"transitions", ev.transitions},
                         {"usage", report.usage},
                         {"usage_entropy", report.usage_entropy},
                         {"restarts", restarts}};
  WriteJson(dir + "/eval.json", eval);
  nlohmann::json m = StageManifest("codec", hash, c);
  m["steps"] = codec.params().step();
  m["state_hash"] = codec.StateHash();
  m["files"] = {{"checkpoint.bin", FileHash(ckpt_path)},
                {"metrics.csv", FileHash(dir + "/metrics.csv")},
                {"eval.json", FileHash(dir + "/eval.json")}};
  WriteJson(dir + "/manifest.json", m);
  summary = {{"stage", "codec"}, {"dir", dir}, {"hash", hash}, {"eval", eval}};
  return codec;
}

transition::TransitionTrainOptions TransitionOptions(const TrainSettings& t, std::uint64_t seed) {
  transition::TransitionTrainOptions opt;
  opt.batch = t.batch;
  opt.adam = Adam(t);
  opt.seed = seed;
  opt.log_every = t.log_every;
  return opt;
}

// Checkpoint write + manifest for transition-model stages.
void SaveTransitionCheckpoint(const std::string& path, const std::string& hash,
                              const transition::TransitionModel& model,
                              const codec::StateCodec* codec,
                              const std::vector<transition::TransitionLogRow>& rows,
                              const eval::FramePredictor* frame,
                              const std::vector<eval::FrameLogRow>* frame_rows) {
  numerics::Checkpoint ckpt;
  model.Save(ckpt, codec);
  if (frame != nullptr) frame->Save(ckpt);
  ckpt.meta()["stage_hash"] = hash;
  nlohmann::json progress = {
      {"metrics", RowsJson<transition::TransitionLogRow>(rows, TransitionRowJson)}};
  if (frame_rows != nullptr) {
    progress["frame_metrics"] = RowsJson<eval::FrameLogRow>(*frame_rows, FrameRowJson);
  }
  ckpt.meta()["progress"] = progress;
  fs::create_directories(fs::path(path).parent_path());
  ckpt.Write(path + ".tmp");
  fs::rename(path + ".tmp", path);
}

nlohmann::json TransitionEvalJson(const transition::TransitionEvaluation& ev,
                                  const std::string& hash) {
  return {{"hash", hash},
          {"policy", ev.policy},
          {"code", ev.code},
          {"value", ev.value},
          {"reward", ev.reward},
          {"code_perplexity", ev.code_perplexity},
          {"uniform_perplexity", ev.uniform_perplexity},
          {"paths", ev.paths}};
}

nlohmann::json TrainTransitionStage(const ExperimentConfig& c, const std::string& name,
                                    const LoadedData& data, const RunOptions& o) {
  const auto it = c.models.find(name);
  if (it == c.models.end()) throw ConfigError("models." + name + ": no such model");
  const ModelSettings& ms = it->second;
  // Stage gate: the frozen codec must exist before any transition model.
  const std::string codec_manifest = StageDir(c, Stage::kCodec, "") + "/manifest.json";
  if (!fs::exists(codec_manifest)) {
    throw ArtifactMismatch("stage order: transition model '" + name +
                           "' requires a trained codec (" + kTwoStageRule +
                           "); run 'train --stage codec' first");
  }
  const codec::StateCodec codec = LoadCodec(c);
  const std::string dir = StageDir(c, Stage::kTransition, name);
  const std::string ckpt_path = dir + "/checkpoint.bin";
  const std::string hash = c.ModelHash(name);
  const TrainSettings& t = ms.train;
  const std::string tag = "transition/" + name;
  transition::TransitionModel model(ms.config, codec.shape(),
                                    transition::PathCodeSizes(ms.config.variant, codec),
                                    DeriveSeed(c.seed, tag + "/init"));
  std::vector<transition::TransitionLogRow> rows;
  if (auto ckpt = ResumePoint(ckpt_path, hash, o)) {
    model = transition::TransitionModel::Load(*ckpt, &codec);
    rows = RowsFrom<transition::TransitionLogRow>(ckpt->meta()["progress"]["metrics"],
                                                  TransitionRowFrom);
    Log(o, tag + ": resuming at step " + std::to_string(model.params().step()));
  }
  transition::TransitionTrainOptions opt = TransitionOptions(t, DeriveSeed(c.seed, tag + "/train"));
  bool first = true;
  int chunks = 0;
  while (first || model.params().step() < t.steps) {
    if (o.max_chunks > 0 && chunks++ == o.max_chunks) {
      return {{"stage", "transition"}, {"interrupted", true}, {"step", model.params().step()}};
    }
    first = false;
    opt.steps = NextTarget(model.params().step(), t.steps, t.checkpoint_every);
    const auto report = transition::TrainTransition(model, &codec, data.train, opt);
    AppendRows(rows, report.curve, t.log_every, t.steps);
    SaveTransitionCheckpoint(ckpt_path, hash, model, &codec, rows, nullptr, nullptr);
    Log(o, tag + ": step " + std::to_string(model.params().step()) + "/" +
               std::to_string(t.steps) +
               (rows.empty() ? "" : " loss " + Num(rows.back().total)));
  }
  WriteFile(dir + "/metrics.csv", TransitionCsv(rows));
  const nlohmann::json eval = TransitionEvalJson(
      transition::EvaluateTransition(model, &codec, data.valid, 2000,
                                     DeriveSeed(c.seed, tag + "/eval")),
      hash);
  WriteJson(dir + "/eval.json", eval);
  nlohmann::json m = StageManifest("transition", hash, c);
  m["model"] = name;
  m["codec_hash"] = c.CodecHash();
  m["steps"] = model.params().step();
  m["files"] = {{"checkpoint.bin", FileHash(ckpt_path)},
                {"metrics.csv", FileHash(dir + "/metrics.csv")},
                {"eval.json", FileHash(dir + "/eval.json")}};
  WriteJson(dir + "/manifest.json", m);
  return {{"stage", "transition"}, {"model", name}, {"dir", dir}, {"hash", hash}, {"eval", eval}};
}

nlohmann::json TrainBaselineStage(const ExperimentConfig& c, const LoadedData& data,
                                  const RunOptions& o) {
  const std::string dir = StageDir(c, Stage::kBaseline, "");
  const std::string ckpt_path = dir + "/checkpoint.bin";
  const std::string hash = c.BaselineHash();
  const codec::EnvShape shape = codec::ShapeOf(c.env);
  transition::TransitionModel model(c.baseline.config, shape, {},
                                    DeriveSeed(c.seed, "baseline/init"));
  eval::FramePredictor frame(c.frame, shape, DeriveSeed(c.seed, "frame/init"));
  std::vector<transition::TransitionLogRow> rows;
  std::vector<eval::FrameLogRow> frame_rows;
  if (auto ckpt = ResumePoint(ckpt_path, hash, o)) {
    model = transition::TransitionModel::Load(*ckpt, nullptr);
    frame = eval::FramePredictor::Load(*ckpt);
    rows = RowsFrom<transition::TransitionLogRow>(ckpt->meta()["progress"]["metrics"],
                                                  TransitionRowFrom);
    frame_rows =
        RowsFrom<eval::FrameLogRow>(ckpt->meta()["progress"]["frame_metrics"], FrameRowFrom);
    Log(o, "baseline: resuming at step " + std::to_string(model.params().step()));
  }
  const TrainSettings& t = c.baseline.train;
  const TrainSettings& ft = c.frame_train;
  transition::TransitionTrainOptions opt =
      TransitionOptions(t, DeriveSeed(c.seed, "baseline/train"));
  eval::FrameTrainOptions fopt;
  fopt.batch = ft.batch;
  fopt.adam = Adam(ft);
  fopt.seed = DeriveSeed(c.seed, "frame/train");
  fopt.log_every = ft.log_every;
  bool first = true;
  int chunks = 0;
  while (first || model.params().step() < t.steps || frame.params().step() < ft.steps) {
    if (o.max_chunks > 0 && chunks++ == o.max_chunks) {
      return {{"stage", "baseline"}, {"interrupted", true}, {"step", model.params().step()}};
    }
    first = false;
    opt.steps = NextTarget(model.params().step(), t.steps, t.checkpoint_every);
    AppendRows(rows, transition::TrainTransition(model, nullptr, data.train, opt).curve,
               t.log_every, t.steps);
    fopt.steps = NextTarget(frame.params().step(), ft.steps, ft.checkpoint_every);
    AppendRows(frame_rows, eval::TrainFramePredictor(frame, data.train, fopt), ft.log_every,
               ft.steps);
    SaveTransitionCheckpoint(ckpt_path, hash, model, nullptr, rows, &frame, &frame_rows);
    Log(o, "baseline: step " + std::to_string(model.params().step()) + "/" +
               std::to_string(t.steps) + ", frame step " +
               std::to_string(frame.params().step()) + "/" + std::to_string(ft.steps));
  }
  WriteFile(dir + "/metrics.csv", TransitionCsv(rows));
  WriteFile(dir + "/frame_metrics.csv", FrameCsv(frame_rows));
  const nlohmann::json eval = TransitionEvalJson(
      transition::EvaluateTransition(model, nullptr, data.valid, 2000,
                                     DeriveSeed(c.seed, "baseline/eval")),
      hash);
  WriteJson(dir + "/eval.json", eval);
  nlohmann::json m = StageManifest("baseline", hash, c);
  m["steps"] = model.params().step();
  m["frame_steps"] = frame.params().step();
  m["files"] = {{"checkpoint.bin", FileHash(ckpt_path)},
                {"metrics.csv", FileHash(dir + "/metrics.csv")},
                {"frame_metrics.csv", FileHash(dir + "/frame_metrics.csv")},
                {"eval.json", FileHash(dir + "/eval.json")}};
  WriteJson(dir + "/manifest.json", m);
  return {{"stage", "baseline"}, {"dir", dir}, {"hash", hash}, {"eval", eval}};
}

// The model a play or MBRE command runs, with the hashes it was built from.
struct LoadedAgentModel {
  std::optional<codec::StateCodec> codec;
  std::optional<transition::TransitionModel> model;
  std::map<std::string, std::string> hashes;
};

LoadedAgentModel LoadAgentModel(const ExperimentConfig& c, const std::string& name) {
  LoadedAgentModel out;
  out.hashes["config"] = c.Hash();
  out.hashes["data"] = c.DataHash();
  if (name == "baseline") {
    out.model.emplace(LoadBaseline(c));
    out.hashes["baseline"] = c.BaselineHash();
  } else {
    if (!c.models.count(name)) throw ConfigError("models." + name + ": no such model");
    out.codec.emplace(LoadCodec(c));
    out.model.emplace(LoadModel(c, name, &*out.codec));
    out.hashes["codec"] = c.CodecHash();
    out.hashes["model"] = c.ModelHash(name);
  }
  return out;
}

std::string PlayLabel(const PlaySettings& p, const mcts::SearchConfig& s) {
  if (!p.label.empty()) return p.label;
  std::string label = p.agent;
  if (p.agent != "random") label += "_" + p.model;
  if (p.agent == "mcts") label += std::string("_") + mcts::ChanceModeName(s.chance_mode);
  return label;
}

mcts::SearchConfig PlaySearch(const ExperimentConfig& c, const PlaySettings& p) {
  mcts::SearchConfig s = c.search;
  if (p.budget) {
    if (*p.budget < 1) throw ConfigError("play.budget: must be >= 1");
    s.budget = *p.budget;
  }
  if (p.mode) s.chance_mode = mcts::ParseChanceMode(*p.mode);
  s.Validate();
  return s;
}

}  // namespace

const char* StageName(Stage stage) {
  switch (stage) {
    case Stage::kCodec: return "codec";
    case Stage::kTransition: return "transition";
    case Stage::kBaseline: return "baseline";
  }
  return "?";
}

Stage ParseStage(const std::string& name) {
  if (name == "codec") return Stage::kCodec;
  if (name == "transition") return Stage::kTransition;
  if (name == "baseline") return Stage::kBaseline;
  throw ConfigError("stage: unknown stage '" + name + "' (codec | transition | baseline)");
}

std::string StageDir(const ExperimentConfig& c, Stage stage, const std::string& model) {
  switch (stage) {
    case Stage::kCodec: return c.output_dir + "/codec";
    case Stage::kTransition: return c.output_dir + "/transition/" + model;
    case Stage::kBaseline: return c.output_dir + "/baseline";
  }
  return c.output_dir;
}

nlohmann::json GenData(const ExperimentConfig& c, const RunOptions& o) {
  c.Validate();
  const std::string dir = DataDir(c);
  const std::uint64_t seed = DeriveSeed(c.seed, "data");
  Log(o, "gen-data: " + std::to_string(c.data.episodes) + " episodes of " + c.env.name);
  const std::vector<envs::Trajectory> all =
      envs::GenerateEpisodes(c.env, c.data.behavior, c.data.episodes, seed, o.workers);
  std::vector<envs::Trajectory> train;
  std::vector<envs::Trajectory> valid;
  std::int64_t transitions = 0;
  for (const envs::Trajectory& e : all) {
    transitions += e.length() - 1;
    (envs::IsValidationEpisode(e.episode_id, c.data.validation_fraction) ? valid : train)
        .push_back(e);
  }
  if (train.empty()) throw ConfigError("data.episodes: no training episodes after the split");
  const nlohmann::json env = envs::EnvConfigToJson(c.env);
  const std::string hash = c.DataHash();
  nlohmann::json files = nlohmann::json::object();
  for (const auto& [split, eps] : {std::pair{std::string("train"), &train},
                                   std::pair{std::string("valid"), &valid}}) {
    envs::DatasetHeader h{env, seed, hash, split, static_cast<std::int64_t>(eps->size())};
    const std::string text = envs::SerializeTrajectories(h, *eps);
    WriteFile(dir + "/" + split + ".jsonl", text);
    files[split + ".jsonl"] = HashHex(text);
  }
  nlohmann::json m = StageManifest("data", hash, c);
  m["episodes"] = c.data.episodes;
  m["train_episodes"] = train.size();
  m["valid_episodes"] = valid.size();
  m["transitions"] = transitions;
  m["files"] = files;
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  m["created"] = stamp;
  WriteJson(dir + "/manifest.json", m);
  Log(o, "gen-data: " + std::to_string(train.size()) + " train, " +
             std::to_string(valid.size()) + " validation episodes");
  m["dir"] = dir;
  return m;
}

LoadedData LoadData(const ExperimentConfig& c) {
  const std::string dir = DataDir(c);
  const nlohmann::json m =
      ReadManifest(dir + "/manifest.json",
                   "missing prerequisite: no dataset under '" + dir + "'; run gen-data first");
  CheckHash("data", m.value("hash", ""), c.DataHash());
  LoadedData out;
  for (const auto& [split, dst] : {std::pair{std::string("train"), &out.train},
                                   std::pair{std::string("valid"), &out.valid}}) {
    const std::string path = dir + "/" + split + ".jsonl";
    CheckFileHash(m, dir, split + ".jsonl");
    envs::Dataset d = envs::ReadTrajectories(path);
    CheckHash(path, d.header.config_hash, c.DataHash());
    *dst = std::move(d.episodes);
  }
  return out;
}

codec::StateCodec LoadCodec(const ExperimentConfig& c) {
  const std::string dir = StageDir(c, Stage::kCodec, "");
  const nlohmann::json m = ReadManifest(
      dir + "/manifest.json",
      "missing prerequisite: no trained codec under '" + dir + "'; run 'train --stage codec'");
  CheckHash("codec", m.value("hash", ""), c.CodecHash());
  CheckFileHash(m, dir, "checkpoint.bin");
  const numerics::Checkpoint ckpt = numerics::Checkpoint::Read(dir + "/checkpoint.bin");
  CheckHash("codec checkpoint", ckpt.meta().value("stage_hash", ""), c.CodecHash());
  codec::StateCodec codec = codec::StateCodec::Load(ckpt);
  CheckHash("codec state", codec.StateHash(), m.value("state_hash", ""));
  return codec;
}

transition::TransitionModel LoadModel(const ExperimentConfig& c, const std::string& name,
                                      const codec::StateCodec* codec) {
  const std::string dir = StageDir(c, Stage::kTransition, name);
  const nlohmann::json m =
      ReadManifest(dir + "/manifest.json", "missing prerequisite: no transition model '" + name +
                                               "' under '" + dir +
                                               "'; run 'train --stage transition --model " +
                                               name + "'");
  CheckHash("transition model '" + name + "'", m.value("hash", ""), c.ModelHash(name));
  CheckHash("codec used by '" + name + "'", m.value("codec_hash", ""), c.CodecHash());
  CheckFileHash(m, dir, "checkpoint.bin");
  const numerics::Checkpoint ckpt = numerics::Checkpoint::Read(dir + "/checkpoint.bin");
  CheckHash("transition checkpoint", ckpt.meta().value("stage_hash", ""), c.ModelHash(name));
  return transition::TransitionModel::Load(ckpt, codec);
}

namespace {

numerics::Checkpoint BaselineCheckpoint(const ExperimentConfig& c) {
  const std::string dir = StageDir(c, Stage::kBaseline, "");
  const nlohmann::json m = ReadManifest(
      dir + "/manifest.json",
      "missing prerequisite: no baseline under '" + dir + "'; run 'train --stage baseline'");
  CheckHash("baseline", m.value("hash", ""), c.BaselineHash());
  CheckFileHash(m, dir, "checkpoint.bin");
  numerics::Checkpoint ckpt = numerics::Checkpoint::Read(dir + "/checkpoint.bin");
  CheckHash("baseline checkpoint", ckpt.meta().value("stage_hash", ""), c.BaselineHash());
  return ckpt;
}

}  // namespace

transition::TransitionModel LoadBaseline(const ExperimentConfig& c) {
  return transition::TransitionModel::Load(BaselineCheckpoint(c), nullptr);
}

eval::FramePredictor LoadFramePredictor(const ExperimentConfig& c) {
  return eval::FramePredictor::Load(BaselineCheckpoint(c));
}

nlohmann::json Train(const ExperimentConfig& c, Stage stage, const std::string& model,
                     const RunOptions& o) {
  c.Validate();
  if (stage == Stage::kTransition) {
    // Check the gate before touching the dataset so the error names the rule.
    if (!fs::exists(StageDir(c, Stage::kCodec, "") + "/manifest.json")) {
      throw ArtifactMismatch("stage order: transition model '" + model +
                             "' requires a trained codec (" + kTwoStageRule +
                             "); run 'train --stage codec' first");
    }
  }
  const LoadedData data = LoadData(c);
  switch (stage) {
    case Stage::kCodec: {
      nlohmann::json summary;
      TrainCodecStage(c, data, o, summary);
      return summary;
    }
    case Stage::kTransition: return TrainTransitionStage(c, model, data, o);
    case Stage::kBaseline: return TrainBaselineStage(c, data, o);
  }
  return {};
}

nlohmann::json Play(const ExperimentConfig& c, const PlaySettings& p, const RunOptions& o) {
  c.Validate();
  const mcts::SearchConfig search = PlaySearch(c, p);
  const int games = p.games.value_or(c.eval.games);
  if (games < 1) throw ConfigError("play.games: must be >= 1");
  eval::AgentSpec spec;
  spec.kind = eval::ParseAgentKind(p.agent);
  spec.search = search;
  LoadedAgentModel loaded;
  if (spec.kind != eval::AgentKind::kRandom) {
    loaded = LoadAgentModel(c, p.model);
    spec.model = &*loaded.model;
  }
  if (o.trace_search && spec.kind != eval::AgentKind::kMcts) {
    throw ConfigError("--trace-search: requires --agent mcts");
  }
  const std::string label = PlayLabel(p, search);
  spec.label = label;
  const std::uint64_t seed = DeriveSeed(c.seed, "play");
  Log(o, "play: " + label + ", " + std::to_string(games) + " games at budget " +
             std::to_string(search.budget));
  eval::MatchReport report = eval::PlayMatch(spec, c.env, games, seed, o.workers);
  for (const auto& [k, v] : loaded.hashes) report.hashes[k] = v;
  const std::string dir = c.output_dir + "/play/" + label;
  nlohmann::json j = report.ToJson();
  j["model"] = spec.kind == eval::AgentKind::kRandom ? "" : p.model;
  j["chance_mode"] = mcts::ChanceModeName(search.chance_mode);
  WriteJson(dir + "/report.json", j);
  std::ostringstream csv;
  eval::WriteMatchCsv(csv, report);
  WriteFile(dir + "/games.csv", csv.str());
  if (o.trace_search) {
    std::ostringstream trace;
    eval::TraceGame(spec, c.env, seed, 0, trace);
    WriteFile(dir + "/trace.jsonl", trace.str());
  }
  const eval::Interval wd = report.win_draw_interval();
  Log(o, "play: " + label + " win+draw " + Num(report.win_draw_rate()) + " [" + Num(wd.lo) +
             ", " + Num(wd.hi) + "]");
  j.erase("records");
  j["dir"] = dir;
  return j;
}

nlohmann::json Sweep(const ExperimentConfig& c, const PlaySettings& p,
                     const std::vector<int>& budgets_in, const RunOptions& o) {
  c.Validate();
  const std::vector<int> budgets = budgets_in.empty() ? c.eval.budgets : budgets_in;
  for (int b : budgets) {
    if (b < 1) throw ConfigError("budgets: entries must be >= 1");
  }
  if (p.agent != "mcts") throw ConfigError("budget-sweep: requires --agent mcts");
  const mcts::SearchConfig search = PlaySearch(c, p);
  const int games = p.games.value_or(c.eval.games);
  if (games < 1) throw ConfigError("play.games: must be >= 1");
  LoadedAgentModel loaded = LoadAgentModel(c, p.model);
  eval::AgentSpec spec;
  spec.kind = eval::AgentKind::kMcts;
  spec.search = search;
  spec.model = &*loaded.model;
  const std::string label = PlayLabel(p, search);
  spec.label = label;
  const std::uint64_t seed = DeriveSeed(c.seed, "play");
  std::vector<eval::MatchReport> reports;
  for (int b : budgets) {
    spec.search.budget = b;
    Log(o, "budget-sweep: " + label + " budget " + std::to_string(b));
    reports.push_back(eval::PlayMatch(spec, c.env, games, seed, o.workers));
    reports.back().hashes.insert(loaded.hashes.begin(), loaded.hashes.end());
  }
  const std::string dir = c.output_dir + "/sweep/" + label;
  std::ostringstream csv;
  eval::WriteSweepCsv(csv, reports);
  WriteFile(dir + "/sweep.csv", csv.str());
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json j = r.ToJson();
    j.erase("records");
    arr.push_back(j);
  }
  // Significance of the change from the smallest to the largest budget.
  const eval::MatchReport& lo = reports.front();
  const eval::MatchReport& hi = reports.back();
  const eval::ProportionTest t = eval::TwoProportionTest(hi.wins + hi.draws, hi.games,
                                                         lo.wins + lo.draws, lo.games);
  nlohmann::json out = {{"schema", "vqplan-sweep"},
                        {"version", 1},
                        {"agent", label},
                        {"model", p.model},
                        {"chance_mode", mcts::ChanceModeName(search.chance_mode)},
                        {"reports", arr},
                        {"first_to_last",
                         {{"budgets", {lo.budget, hi.budget}},
                          {"z", t.z},
                          {"p_two_sided", t.p_two_sided},
                          {"p_greater", t.p_greater},
                          {"p_less", t.p_less}}}};
  WriteJson(dir + "/sweep.json", out);
  out["dir"] = dir;
  return out;
}

nlohmann::json EvalMbre(const ExperimentConfig& c, const MbreSettings& s, const RunOptions& o) {
  c.Validate();
  const int k = s.k.value_or(c.eval.mbre_k);
  const int horizon = s.horizon.value_or(c.eval.mbre_horizon);
  const int prefix = c.eval.mbre_prefix;
  if (k < 1) throw ConfigError("eval-mbre.k: must be >= 1");
  if (horizon < 0) throw ConfigError("eval-mbre.horizon: must be >= 0");
  const LoadedData data = LoadData(c);
  LoadedAgentModel loaded = LoadAgentModel(c, s.model);
  std::optional<eval::FramePredictor> frame;
  if (s.model == "baseline") frame.emplace(LoadFramePredictor(c));
  const codec::EnvShape shape = codec::ShapeOf(c.env);
  std::vector<const envs::Trajectory*> truths;
  for (const envs::Trajectory& e : data.valid) {
    if (static_cast<int>(truths.size()) >= c.eval.mbre_truths) break;
    if (e.length() >= prefix + horizon) truths.push_back(&e);
  }
  if (truths.empty()) {
    throw ConfigError("eval-mbre: no validation episode has prefix + horizon = " +
                      std::to_string(prefix + horizon) + " frames");
  }
  const std::string label = s.label.empty() ? s.model : s.label;
  const std::uint64_t seed = DeriveSeed(c.seed, "mbre/" + label);
  Log(o, "eval-mbre: " + label + ", " + std::to_string(truths.size()) + " truths, k " +
             std::to_string(k) + ", horizon " + std::to_string(horizon));
  // The best-sample error is per truth, so truths are scored one at a
  // time and averaged.
  std::vector<eval::MbreRow> sum(horizon);
  const Rng base(seed);
  for (std::size_t i = 0; i < truths.size(); ++i) {
    Rng rng = base.Split(i);
    eval::RolloutSet set;
    set.prefix = prefix;
    set.horizon = horizon;
    set.truths.push_back(eval::TruthFrames(*truths[i], shape, prefix + horizon));
    set.samples.push_back(
        frame ? eval::BaselineRollouts(*frame, *loaded.model, *truths[i], prefix, k, horizon, rng)
              : eval::SampleRollouts(*loaded.codec, *loaded.model, *truths[i], prefix, k,
                                     horizon, rng));
    const auto rows = eval::MbreCurve(set, k);
    for (int h = 0; h < horizon; ++h) {
      sum[h].horizon = rows[h].horizon;
      sum[h].cumulative += rows[h].cumulative;
      sum[h].target += rows[h].target;
    }
  }
  const double n = static_cast<double>(truths.size());
  std::string csv = "horizon,mbre_cumulative,mbre_target,k,seed\n";
  csv += "0,0,0," + std::to_string(k) + "," + std::to_string(seed) + "\n";
  nlohmann::json curve = nlohmann::json::array();
  curve.push_back({{"horizon", 0}, {"cumulative", 0.0}, {"target", 0.0}});
  for (auto& r : sum) {
    r.cumulative /= n;
    r.target /= n;
    csv += std::to_string(r.horizon) + "," + Num(r.cumulative) + "," + Num(r.target) + "," +
           std::to_string(k) + "," + std::to_string(seed) + "\n";
    curve.push_back({{"horizon", r.horizon}, {"cumulative", r.cumulative}, {"target", r.target}});
  }
  const std::string dir = c.output_dir + "/mbre/" + label;
  WriteFile(dir + "/mbre.csv", csv);
  nlohmann::json out = {{"schema", "vqplan-mbre"},
                        {"version", 1},
                        {"model", s.model},
                        {"k", k},
                        {"horizon", horizon},
                        {"prefix", prefix},
                        {"truths", truths.size()},
                        {"seed", seed},
                        {"hashes", loaded.hashes},
                        {"mbre_cumulative", horizon ? sum.back().cumulative : 0.0},
                        {"mbre_target", horizon ? sum.back().target : 0.0},
                        {"curve", curve}};
  WriteJson(dir + "/mbre.json", out);
  Log(o, "eval-mbre: " + label + " cumulative " + Num(out["mbre_cumulative"].get<double>()));
  out["dir"] = dir;
  return out;
}

}  // namespace vqplan::cli
