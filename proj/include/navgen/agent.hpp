#pragma once

#include "navgen/episode.hpp"
#include "navgen/model.hpp"
#include "navgen/scene_encoder.hpp"
#include "navgen/schema.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace navgen {

enum class RolloutMode { Teacher, Student, Infer };

std::string_view to_string(RolloutMode mode);

struct AgentOptions {
  double student_temperature = 1.0;
  double explore_temperature = 0.01;
  std::vector<TaskKind> exploration_kinds{TaskKind::ObjLoc};
  int answer_max_tokens = 8;
  int summary_max_tokens = 40;
};

// Replaces the model's navigation choice (harness baselines). Receives the
// number of real candidates at the current viewpoint and returns 0..count.
using Policy = std::function<int(const World& world, int viewpoint, int candidate_count, Rng& rng)>;

struct Trajectory {
  std::vector<int> visited;
  std::vector<int> chosen;   // candidate id picked at each step
  std::vector<int> teacher;  // teacher candidate id at each step
  bool stopped = false;
  std::vector<TokenStream> streams;  // supervised streams (Teacher/Student)
};

// Next candidate on the shortest path to the nearest goal, 0 when at a goal.
int teacher_action(const World& world, const Episode& episode, int current);

// Observe -> assemble -> act -> move loop for navigation episodes
// (VLN, OBJLOC, and the navigation stage of EQA). Teacher and Student modes
// record one supervised stream per step, plus the grounding stream for OBJLOC.
Trajectory rollout(const World& world, const Episode& episode, const ModelParams& params, RolloutMode mode, Rng& rng,
                   SceneCache& cache, const AgentOptions& options = {}, const Policy* policy = nullptr);

// Navigation prompt at the current state, with an optional target.
TokenStream navigation_stream(const World& world, const Episode& episode, int current,
                              const std::vector<SlotElement>& history, SceneCache& cache,
                              std::optional<int> target = std::nullopt);

// Object-selection prompt at `viewpoint` after the given history.
TokenStream grounding_stream(const World& world, const Episode& episode, int viewpoint,
                             const std::vector<SlotElement>& history, SceneCache& cache,
                             std::optional<int> target = std::nullopt);

// History vectors of a trajectory: the candidate vector chosen at each move.
std::vector<SlotElement> trajectory_history(const World& world, const std::vector<int>& visited, SceneCache& cache);

// Picks an object id (0 = not exist) at the final viewpoint.
int localize(const World& world, const Episode& episode, const ModelParams& params, const Trajectory& trajectory,
             SceneCache& cache);

// Scene-question prompt over the given positions (no history block).
TokenStream qa_stream(const World& world, const std::string& question, const std::vector<int>& positions,
                      SceneCache& cache, const std::optional<std::string>& answer = std::nullopt);

std::string answer_qa(const World& world, const std::string& question, const ModelParams& params,
                      const std::vector<int>& positions, SceneCache& cache, const AgentOptions& options = {});

// Summarization prompt for a ground-truth path.
TokenStream summary_stream(const World& world, const Episode& episode, SceneCache& cache,
                           const std::optional<std::string>& reference = std::nullopt);

std::string summarize(const World& world, const Episode& episode, const ModelParams& params, SceneCache& cache,
                      const AgentOptions& options = {});

using Answerer = std::function<std::string(const World& world, const std::string& question,
                                           const std::vector<int>& positions)>;

struct EqaOptions {
  bool teacher_navigation = false;  // follow teacher actions in stage 1
  Answerer answerer;                // overrides the model in stage 2
};

struct EqaResult {
  Trajectory trajectory;
  std::vector<int> positions;
  std::string answer;
};

// Two-stage composition: navigate with the navigation schema, then answer
// the question at the final viewpoint.
EqaResult eqa(const World& world, const Episode& episode, const ModelParams& params, Rng& rng, SceneCache& cache,
              const AgentOptions& options = {}, const EqaOptions& eqa_options = {});

}  // namespace navgen
