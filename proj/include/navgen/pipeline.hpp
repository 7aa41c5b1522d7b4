#pragma once

#include "navgen/agent.hpp"
#include "navgen/config.hpp"
#include "navgen/metrics.hpp"
#include "navgen/trainer.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace navgen {

// Worlds plus episodes of one split. Worlds live behind a shared pointer so
// splits that reuse another split's worlds share them.
struct SplitData {
  std::string name;
  std::shared_ptr<const std::vector<World>> worlds;
  std::string world_ref;  // sha256 of the serialized world set
  std::map<TaskKind, std::vector<Episode>> episodes;

  Datasets datasets() const;
};

std::string world_set_text(const std::vector<World>& worlds);
std::vector<World> parse_world_set(const std::string& text);

std::vector<World> generate_worlds(const RunConfig& cfg, const std::string& split);
std::vector<Episode> generate_episodes(const RunConfig& cfg, const std::string& split, TaskKind kind,
                                       const std::vector<World>& worlds);
// Generates every split in the config.
std::map<std::string, SplitData> generate_data(const RunConfig& cfg);

// Layout: <dir>/<split>/worlds.json and <dir>/<split>/<kind>.jsonl.
void write_data(const std::string& dir, const std::map<std::string, SplitData>& data);
SplitData load_split(const std::string& dir, const std::string& split);

std::string data_counts_table(const std::map<std::string, SplitData>& data);

enum class EvalPolicy { Model, Oracle, RandomWalk };

struct EvalOptions {
  std::vector<TaskKind> kinds{kAllKinds, kAllKinds + 5};
  double threshold = kDefaultSuccessThreshold;
  AgentOptions agent;
  EvalPolicy policy = EvalPolicy::Model;
  std::uint64_t seed = 0;
  int max_episodes = -1;  // per kind, -1 = all
};

EvalOptions eval_options(const RunConfig& cfg);

struct TrainRun {
  std::vector<TaskKind> exclude;          // kinds removed from the mixture
  std::optional<std::string> resume;      // checkpoint to continue from
  std::optional<int> stop_at;             // stop before this step
  TrainHooks hooks;
};

// Trains on the split with the config's schedule. Excluded kinds get zero
// weight and no data.
TrainState run_training(const RunConfig& cfg, const SplitData& train, const TrainRun& run);

// Checkpoint metadata: run config, schedule position, loss history.
nlohmann::json checkpoint_meta(const RunConfig& cfg, const TrainState& state, const std::vector<TaskKind>& exclude);
void save_state(const std::string& path, const RunConfig& cfg, const TrainState& state,
                const std::vector<TaskKind>& exclude);
// Restores params, optimizer and loss history; returns the stored config.
TrainState restore_state(const Checkpoint& ck);
RunConfig checkpoint_config(const Checkpoint& ck);

// Supervised prompt of an episode's first decision: the first navigation
// step for VLN/OBJLOC/EQA, the whole prompt for SUMM/QA.
TokenStream first_stream(const World& world, const Episode& episode, SceneCache& cache);

// Runs inference rollouts and metrics for the selected kinds.
std::vector<EpisodeRecord> evaluate(const SplitData& split, const ModelParams& params, const EvalOptions& options);

}  // namespace navgen
