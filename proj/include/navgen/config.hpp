#pragma once

#include "navgen/episode.hpp"
#include "navgen/params.hpp"
#include "navgen/trainer.hpp"
#include "navgen/world.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace navgen {

struct SplitSpec {
  std::string world_set;  // split whose worlds are reused ("" = own worlds)
  int worlds = 1;
  std::map<TaskKind, int> episodes;
};

struct EvalConfig {
  double threshold = 3.0;
  double explore_temperature = 0.01;
  std::vector<TaskKind> exploration_kinds{TaskKind::ObjLoc};
  int answer_max_tokens = 8;
  int summary_max_tokens = 40;
};

// One document drives a whole experiment; every randomness source is a
// named sub-seed of `seed`.
struct RunConfig {
  std::uint64_t seed = 1;
  WorldConfig world;
  TaskConfig tasks;
  std::map<std::string, SplitSpec> splits;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;

  static RunConfig defaults();
  // Throws ConfigError listing every offending key.
  static RunConfig from_json(const nlohmann::json& doc);
  static RunConfig load(const std::string& path);
  nlohmann::ordered_json to_json() const;

  std::uint64_t world_seed(const std::string& split, int index) const;
  std::uint64_t episode_seed(const std::string& split, TaskKind kind, int index) const;
  std::uint64_t train_seed() const;
  std::uint64_t eval_seed() const;
  std::uint64_t init_seed() const;
};

inline const std::vector<std::string> kSplitNames{"train", "val_seen", "val_unseen"};

nlohmann::ordered_json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& doc);

}  // namespace navgen
