#include "navgen/agent.hpp"

#include "navgen/vocab.hpp"

#include <algorithm>

namespace navgen {

namespace {

std::vector<int> marker_range(int count) {
  std::vector<int> out;
  for (int i = 0; i <= count; ++i) out.push_back(Vocabulary::standard().marker(i));
  return out;
}

void append_target(TokenStream& s, const std::vector<int>& tokens) {
  const std::size_t begin = s.size();
  for (int t : tokens) s.elements.emplace_back(TextElement{t});
  s.target_span = TargetSpan{begin, s.size()};
}

int decode_id(const ModelParams& params, const TokenStream& prompt, int count, DecodeOptions opts, Rng* rng) {
  opts.allowed = marker_range(count);
  opts.max_new = 1;
  const auto out = decode(params, prompt, opts, rng);
  return *Vocabulary::standard().marker_value(out.at(0));
}

SlotElement as_history(SlotElement slot) {
  slot.tag = SlotTag::History;
  return slot;
}

bool explores(const AgentOptions& o, TaskKind kind) {
  return std::find(o.exploration_kinds.begin(), o.exploration_kinds.end(), kind) != o.exploration_kinds.end();
}

TaskKind navigation_kind(const Episode& ep) {
  switch (ep.kind) {
    case TaskKind::Vln:
    case TaskKind::Eqa: return TaskKind::Vln;
    case TaskKind::ObjLoc: return TaskKind::ObjLoc;
    default: break;
  }
  throw SchemaError("episode kind " + std::string(to_string(ep.kind)) + " has no navigation stage");
}

}  // namespace

std::string_view to_string(RolloutMode mode) {
  switch (mode) {
    case RolloutMode::Teacher: return "teacher";
    case RolloutMode::Student: return "student";
    case RolloutMode::Infer: return "infer";
  }
  return "?";
}

int teacher_action(const World& world, const Episode& episode, int current) {
  if (std::find(episode.goal_viewpoints.begin(), episode.goal_viewpoints.end(), current) !=
      episode.goal_viewpoints.end()) {
    return 0;
  }
  int goal = -1;
  double best = 0.0;
  for (int g : episode.goal_viewpoints) {
    const double d = world.geodesic(current, g);
    if (goal < 0 || d < best || (d == best && g < goal)) {
      goal = g;
      best = d;
    }
  }
  if (goal < 0) throw ValidationError("episode has no goal viewpoints");
  const auto path = world.shortest_path(current, goal);
  return world.candidate_id(current, path[1]);
}

TokenStream navigation_stream(const World& world, const Episode& episode, int current,
                              const std::vector<SlotElement>& history, SceneCache& cache, std::optional<int> target) {
  const TaskKind kind = navigation_kind(episode);
  PromptParts parts;
  parts.kind = kind;
  parts.observation_kind = ObservationKind::Candidate;
  parts.task_text = task_text(kind, episode.instruction, episode.dialog);
  parts.history = history;
  parts.history_cap = episode.max_steps;
  parts.observation = cache.candidates(world, current);
  parts.output_hint = output_hint(kind);
  return assemble(parts, target ? target_for(kind, *target) : std::vector<int>{});
}

TokenStream grounding_stream(const World& world, const Episode& episode, int viewpoint,
                             const std::vector<SlotElement>& history, SceneCache& cache, std::optional<int> target) {
  PromptParts parts;
  parts.kind = TaskKind::ObjLoc;
  parts.observation_kind = ObservationKind::Object;
  parts.task_text = task_text(TaskKind::ObjLoc, episode.instruction, false, true);
  parts.history = history;
  parts.history_cap = episode.max_steps;
  parts.observation = cache.objects(world, viewpoint);
  parts.output_hint = output_hint(TaskKind::ObjLoc, true);
  return assemble(parts, target ? target_for(TaskKind::ObjLoc, *target) : std::vector<int>{});
}

std::vector<SlotElement> trajectory_history(const World& world, const std::vector<int>& visited, SceneCache& cache) {
  std::vector<SlotElement> out;
  for (std::size_t i = 1; i < visited.size(); ++i) {
    const int cid = world.candidate_id(visited[i - 1], visited[i]);
    out.push_back(as_history(cache.candidates(world, visited[i - 1])[static_cast<std::size_t>(cid)].slot));
  }
  return out;
}

Trajectory rollout(const World& world, const Episode& episode, const ModelParams& params, RolloutMode mode, Rng& rng,
                   SceneCache& cache, const AgentOptions& options, const Policy* policy) {
  navigation_kind(episode);
  if (episode.max_steps < 1) throw ValidationError("max_steps must be > 0");
  Trajectory traj;
  int current = episode.start;
  traj.visited.push_back(current);
  std::vector<SlotElement> history;
  for (int step = 0; step < episode.max_steps; ++step) {
    const int teacher = teacher_action(world, episode, current);
    const auto& cands = world.candidates(current);
    const int count = static_cast<int>(cands.size());
    int choice = teacher;
    if (policy) {
      choice = (*policy)(world, current, count, rng);
      if (choice < 0 || choice > count) throw DecodeError("policy chose an invalid candidate");
    } else if (mode != RolloutMode::Teacher) {
      TokenStream prompt = navigation_stream(world, episode, current, history, cache);
      DecodeOptions opts;
      if (mode == RolloutMode::Student) {
        opts.mode = DecodeOptions::Mode::Sample;
        opts.temperature = options.student_temperature;
      } else if (explores(options, episode.kind)) {
        opts.mode = DecodeOptions::Mode::Sample;
        opts.temperature = options.explore_temperature;
      }
      choice = decode_id(params, prompt, count, opts, &rng);
      if (mode == RolloutMode::Student) {
        append_target(prompt, target_for(navigation_kind(episode), teacher));
        traj.streams.push_back(std::move(prompt));
      }
    }
    if (mode == RolloutMode::Teacher && !policy) {
      traj.streams.push_back(navigation_stream(world, episode, current, history, cache, teacher));
    }
    traj.chosen.push_back(choice);
    traj.teacher.push_back(teacher);
    if (choice == 0) {
      traj.stopped = true;
      break;
    }
    history.push_back(as_history(cache.candidates(world, current)[static_cast<std::size_t>(choice)].slot));
    current = cands[static_cast<std::size_t>(choice - 1)].neighbor;
    traj.visited.push_back(current);
  }
  if (episode.kind == TaskKind::ObjLoc && mode != RolloutMode::Infer && !policy) {
    const int final_vp = traj.visited.back();
    const int target = (episode.target_object && episode.target_object->viewpoint == final_vp)
                           ? episode.target_object->object_id
                           : 0;
    traj.streams.push_back(grounding_stream(world, episode, final_vp, history, cache, target));
  }
  return traj;
}

int localize(const World& world, const Episode& episode, const ModelParams& params, const Trajectory& trajectory,
             SceneCache& cache) {
  if (episode.kind != TaskKind::ObjLoc) throw SchemaError("localize requires an OBJLOC episode");
  if (trajectory.visited.empty()) throw ValidationError("empty trajectory");
  const int final_vp = trajectory.visited.back();
  const auto history = trajectory_history(world, trajectory.visited, cache);
  const TokenStream prompt = grounding_stream(world, episode, final_vp, history, cache);
  const int count = static_cast<int>(world.viewpoint(final_vp).objects.size());
  return decode_id(params, prompt, count, DecodeOptions{}, nullptr);
}

TokenStream qa_stream(const World& world, const std::string& question, const std::vector<int>& positions,
                      SceneCache& cache, const std::optional<std::string>& answer) {
  std::vector<ScenePosition> scene;
  for (int v : positions) {
    auto objects = cache.objects(world, v);
    objects.erase(objects.begin());  // not-exist option is only offered for grounding
    scene.push_back(ScenePosition{cache.scene(world, v), std::move(objects)});
  }
  PromptParts parts;
  parts.kind = TaskKind::Qa;
  parts.observation_kind = ObservationKind::Scene;
  parts.task_text = task_text(TaskKind::Qa, question);
  parts.history_cap = 0;
  parts.observation = scene_observation(scene);
  parts.output_hint = output_hint(TaskKind::Qa);
  return assemble(parts, answer ? target_for(TaskKind::Qa, *answer) : std::vector<int>{});
}

std::string answer_qa(const World& world, const std::string& question, const ModelParams& params,
                      const std::vector<int>& positions, SceneCache& cache, const AgentOptions& options) {
  const TokenStream prompt = qa_stream(world, question, positions, cache);
  DecodeOptions opts;
  opts.max_new = options.answer_max_tokens;
  const auto tokens = decode(params, prompt, opts, nullptr);
  return Vocabulary::standard().detokenize(tokens);
}

TokenStream summary_stream(const World& world, const Episode& episode, SceneCache& cache,
                           const std::optional<std::string>& reference) {
  if (!episode.gt_path) throw ValidationError("summarization needs a path");
  PromptParts parts;
  parts.kind = TaskKind::Summ;
  parts.observation_kind = ObservationKind::None;
  parts.task_text = task_text(TaskKind::Summ, episode.instruction);
  parts.history = trajectory_history(world, *episode.gt_path, cache);
  parts.history_cap = episode.max_steps;
  parts.output_hint = output_hint(TaskKind::Summ);
  return assemble(parts, reference ? target_for(TaskKind::Summ, *reference) : std::vector<int>{});
}

std::string summarize(const World& world, const Episode& episode, const ModelParams& params, SceneCache& cache,
                      const AgentOptions& options) {
  const TokenStream prompt = summary_stream(world, episode, cache);
  DecodeOptions opts;
  opts.max_new = options.summary_max_tokens;
  return Vocabulary::standard().detokenize(decode(params, prompt, opts, nullptr));
}

EqaResult eqa(const World& world, const Episode& episode, const ModelParams& params, Rng& rng, SceneCache& cache,
              const AgentOptions& options, const EqaOptions& eqa_options) {
  if (episode.kind != TaskKind::Eqa) throw SchemaError("eqa requires an EQA episode");
  if (!episode.question) throw ValidationError("EQA episode without a question");
  EqaResult result;
  const RolloutMode mode = eqa_options.teacher_navigation ? RolloutMode::Teacher : RolloutMode::Infer;
  result.trajectory = rollout(world, episode, params, mode, rng, cache, options);
  result.trajectory.streams.clear();
  result.positions = {result.trajectory.visited.back()};
  result.answer = eqa_options.answerer ? eqa_options.answerer(world, *episode.question, result.positions)
                                       : answer_qa(world, *episode.question, params, result.positions, cache, options);
  return result;
}

}  // namespace navgen
