#pragma once

#include "navgen/agent.hpp"
#include "navgen/episode.hpp"
#include "navgen/params.hpp"
#include "navgen/world.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace navgen {

enum class Stage { Pretrain, Finetune };
std::string_view to_string(Stage stage);

struct TrainConfig {
  int pretrain_steps = 2000;
  int finetune_steps = 1000;
  int batch_size = 16;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // <= 0 disables clipping
  std::map<TaskKind, double> weights;  // empty: proportional to dataset sizes
  int alternation_period = 1;
  double student_temperature = 1.0;

  int total_steps() const { return pretrain_steps + finetune_steps; }
  void validate() const;
};

// Episodes per kind over a shared world set.
struct Datasets {
  const std::vector<World>* worlds = nullptr;
  std::map<TaskKind, std::vector<Episode>> episodes;

  const World& world_of(const Episode& e) const { return worlds->at(static_cast<std::size_t>(e.world)); }
};

// Normalized mixing weights over kAllKinds. Throws ConfigError for negative
// or all-zero weights, or weight on a kind without data.
std::vector<double> mixing_weights(const Datasets& data, const std::map<TaskKind, double>& weights);

TaskKind sample_kind(const std::vector<double>& weights, Rng& rng);

struct Batch {
  std::vector<TokenStream> streams;
  std::vector<TaskKind> kinds;            // one per drawn item
  std::vector<std::string> episode_ids;  // one per drawn item
};

// Draws batch_size items; navigation items expand into per-step streams via
// a rollout in `mode`.
Batch make_batch(const Datasets& data, const std::vector<double>& weights, Rng& rng, int batch_size,
                 RolloutMode mode, const ModelParams& params, SceneCache& cache, const AgentOptions& agent = {});

struct AdamState {
  ModelParams m;
  ModelParams v;
  long long step = 0;

  static AdamState zeros_like(const ModelParams& params);
};

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, const TrainConfig& cfg);

double global_norm(const ModelParams& grads);
// Scales grads so their global norm is at most max_norm; returns the
// pre-clip norm.
double clip_global_norm(ModelParams& grads, double max_norm);

struct LossRecord {
  int step = 0;
  double loss = 0.0;
  Stage stage = Stage::Pretrain;
  RolloutMode mode = RolloutMode::Teacher;
};

struct TrainState {
  ModelParams params;
  AdamState adam;
  int next_step = 0;
  std::vector<LossRecord> losses;
};

struct TrainHooks {
  std::function<void(const LossRecord&)> on_step;
  std::function<void(const Batch&, int step)> on_batch;
};

TrainState initial_state(const ModelConfig& config, std::uint64_t init_seed);

// Runs steps [state.next_step, stop_at) of the two-stage schedule. Each step
// draws from an rng derived from (seed, step), so resuming from a saved state
// reproduces an uninterrupted run. Throws NumericAbort on a non-finite loss.
void train(const Datasets& data, const TrainConfig& cfg, std::uint64_t seed, TrainState& state,
           std::optional<int> stop_at = std::nullopt, const TrainHooks& hooks = {});

// Mean of the first / last `window` losses.
double smoothed_head(const std::vector<LossRecord>& losses, std::size_t window);
double smoothed_tail(const std::vector<LossRecord>& losses, std::size_t window);

std::string loss_csv(const std::vector<LossRecord>& losses);

// Binary checkpoint: "NVGN", u32 version, u64 meta length, meta JSON,
// u32 tensor count, tensor records (name, rows, cols, doubles), u32 CRC32
// of everything before it.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  AdamState adam;
  nlohmann::json meta;
};

void save_checkpoint(const std::string& path, const ModelParams& params, const AdamState& adam,
                     const nlohmann::json& meta);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace navgen
