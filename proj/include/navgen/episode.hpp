#pragma once

#include "navgen/common.hpp"
#include "navgen/world.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace navgen {

enum class TaskKind { Vln, ObjLoc, Summ, Qa, Eqa };

inline constexpr TaskKind kAllKinds[] = {TaskKind::Vln, TaskKind::ObjLoc, TaskKind::Summ, TaskKind::Qa, TaskKind::Eqa};

std::string_view to_string(TaskKind kind);
TaskKind parse_kind(std::string_view text);  // accepts "VLN" / "vln" etc.

struct TargetObject {
  int viewpoint = 0;
  int object_id = 0;
  bool operator==(const TargetObject&) const = default;
};

struct Episode {
  std::string episode_id;
  TaskKind kind = TaskKind::Vln;
  int world = 0;  // index into the split's world set
  std::string instruction;
  std::optional<std::string> question;  // EQA second-stage question
  int start = 0;
  std::vector<int> goal_viewpoints;
  std::optional<TargetObject> target_object;
  std::optional<std::vector<int>> gt_path;
  std::vector<std::string> references;
  std::optional<std::string> qa_answer;
  std::vector<int> positions;  // QA observation viewpoints
  int max_steps = 1;
  bool dialog = false;

  bool operator==(const Episode&) const = default;

  // Per-kind structural invariants; throws ValidationError.
  void validate() const;
};

// Checks an episode against its world: adjacency of gt_path, goal reachability,
// object placement. Throws ValidationError.
void validate_against(const Episode& episode, const World& world);

struct TaskConfig {
  int min_path_len = 3;  // nodes, inclusive
  int max_path_len = 6;
  double min_goal_distance = 3.5;  // meters between start and goal
  int max_tries = 2000;
  int history_cap_vln = 15;
  int history_cap_objloc = 20;
  int history_cap_dialog = 30;
  int history_cap_eqa = 15;
  double dialog_fraction = 0.0;
  int qa_num_positions = 3;
  double qa_count_fraction = 0.3;

  void validate() const;
};

// Ordered landmark words of the view slots traversed along a path.
std::vector<std::string> path_landmarks(const World& world, const std::vector<int>& path);
// Step-by-step route instruction for a path ("go to the arch then the piano and stop .").
std::string route_instruction(const World& world, const std::vector<int>& path);

Episode synth_vln(const World& world, Rng& rng, const TaskConfig& cfg);
Episode synth_objloc(const World& world, Rng& rng, const TaskConfig& cfg);
Episode synth_summ(const World& world, Rng& rng, const TaskConfig& cfg);
Episode synth_qa(const World& world, Rng& rng, const TaskConfig& cfg);
Episode synth_eqa(const World& world, Rng& rng, const TaskConfig& cfg);
Episode synth_episode(TaskKind kind, const World& world, Rng& rng, const TaskConfig& cfg);

// Answers a templated scene question directly from world facts. Returns
// nullopt if the question does not parse or its referent is not unique.
std::optional<std::string> answer_from_world(const World& world, std::string_view question,
                                             const std::vector<int>& positions);

// ---------------------------------------------------------------------------
// JSONL exchange format: header line then one episode per line.
// ---------------------------------------------------------------------------
struct EpisodeFile {
  std::string world_ref;
  std::vector<Episode> episodes;
};

nlohmann::ordered_json episode_to_json(const Episode& episode);
Episode episode_from_json(const nlohmann::json& doc, bool strict = true);

void write_jsonl(const std::string& path, const std::vector<Episode>& episodes, const std::string& world_ref);
EpisodeFile read_jsonl(const std::string& path, bool strict = true);

}  // namespace navgen
