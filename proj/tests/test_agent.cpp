#include "helpers.hpp"
#include "navgen/agent.hpp"

#include <gtest/gtest.h>

using namespace navgen;
using namespace navgen::testing;

namespace {

// Untied head whose only live logit is "(0)".
ModelParams always_stop() {
  ModelConfig cfg = small_model_config();
  cfg.tie_embeddings = false;
  ModelParams p = small_params(21, cfg);
  p.decoder.final_norm.gain.setZero();
  p.decoder.final_norm.shift.setZero();
  p.decoder.final_norm.shift(0, 0) = 1.0;
  p.decoder.output.setZero();
  p.decoder.output(0, Vocabulary::standard().marker(0)) = 40.0;
  return p;
}

Episode objloc_on(int start, int goal) {
  Episode ep;
  ep.episode_id = "manual";
  ep.kind = TaskKind::ObjLoc;
  ep.instruction = "find the sink near the arch .";
  ep.start = start;
  ep.goal_viewpoints = {goal};
  ep.max_steps = 6;
  return ep;
}

}  // namespace

TEST(NavAgent, TeacherReproducesGroundTruthPaths) {
  const ModelParams p = small_params();
  TaskConfig tc;
  int episodes = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const World w = generate_world(seed, small_world_config(30));
    SceneCache cache(p, false);
    Rng rng(seed);
    for (int i = 0; i < 100; ++i, ++episodes) {
      const Episode ep = synth_vln(w, rng, tc);
      const Trajectory t = rollout(w, ep, p, RolloutMode::Teacher, rng, cache);
      ASSERT_TRUE(ep.gt_path.has_value());
      EXPECT_EQ(t.visited, *ep.gt_path) << ep.episode_id;
      EXPECT_TRUE(t.stopped);
      EXPECT_EQ(t.chosen, t.teacher);
      EXPECT_EQ(t.streams.size(), t.chosen.size());
      EXPECT_EQ(t.chosen.back(), 0);
    }
  }
  EXPECT_EQ(episodes, 500);
}

TEST(NavAgent, AlwaysStopModelStaysAtStart) {
  const ModelParams p = always_stop();
  const World w = generate_world(3, small_world_config(30));
  SceneCache cache(p, false);
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const Episode ep = synth_vln(w, rng, TaskConfig{});
    const Trajectory t = rollout(w, ep, p, RolloutMode::Infer, rng, cache);
    EXPECT_EQ(t.visited, std::vector<int>{ep.start});
    EXPECT_TRUE(t.stopped);
    EXPECT_EQ(t.chosen, std::vector<int>{0});
    EXPECT_TRUE(t.streams.empty());
  }
}

TEST(NavAgent, StudentRolloutIsSeedDeterministic) {
  const ModelParams p = small_params(4);
  const World w = generate_world(4, small_world_config(30));
  Rng erng(4);
  const Episode ep = synth_vln(w, erng, TaskConfig{});
  std::optional<Trajectory> first;
  for (int run = 0; run < 20; ++run) {
    SceneCache cache(p, false);
    Rng rng(99);
    const Trajectory t = rollout(w, ep, p, RolloutMode::Student, rng, cache);
    EXPECT_EQ(t.streams.size(), t.chosen.size());
    for (std::size_t i = 0; i < t.streams.size(); ++i) {
      const auto& s = t.streams[i];
      ASSERT_TRUE(s.target_span.has_value());
      // Student streams are supervised with the teacher's action.
      EXPECT_EQ(Vocabulary::standard().marker_value(s.token(s.target_span->begin)), t.teacher[i]);
    }
    if (!first) {
      first = t;
      continue;
    }
    EXPECT_EQ(t.visited, first->visited);
    EXPECT_EQ(t.chosen, first->chosen);
  }
}

TEST(NavAgent, PolicyOverridesModel) {
  const ModelParams p = always_stop();
  const World w = generate_world(5, small_world_config(30));
  SceneCache cache(p, false);
  Rng rng(5);
  const Episode ep = synth_vln(w, rng, TaskConfig{});
  const Policy first = [](const World&, int, int count, Rng&) { return count >= 1 ? 1 : 0; };
  const Trajectory t = rollout(w, ep, p, RolloutMode::Infer, rng, cache, {}, &first);
  EXPECT_EQ(static_cast<int>(t.chosen.size()), ep.max_steps);
  EXPECT_FALSE(t.stopped);
  const Policy bad = [](const World&, int, int count, Rng&) { return count + 1; };
  EXPECT_THROW(rollout(w, ep, p, RolloutMode::Infer, rng, cache, {}, &bad), DecodeError);
}

TEST(NavAgent, LocalizeWithoutObjectsAnswersNotExist) {
  const World w = line_world();  // no objects anywhere
  const ModelParams p = small_params(6);
  SceneCache cache(p, false);
  const Episode ep = objloc_on(0, 2);
  Trajectory t;
  t.visited = {0, 1, 2};
  EXPECT_EQ(localize(w, ep, p, t, cache), 0);
  Rng rng(6);
  const Trajectory teacher = rollout(w, ep, p, RolloutMode::Teacher, rng, cache);
  EXPECT_EQ(teacher.visited, t.visited);
  // Navigation steps plus one grounding stream whose target is "(0)".
  ASSERT_EQ(teacher.streams.size(), teacher.chosen.size() + 1);
  const auto& g = teacher.streams.back();
  EXPECT_EQ(Vocabulary::standard().marker_value(g.token(g.target_span->begin)), 0);
}

TEST(NavAgent, EqaAnswersAtTheFinalViewpoint) {
  const World w = generate_world(7, WorldConfig{});
  ModelConfig cfg = small_model_config();
  cfg.d_feat = w.config().d_feat;
  const ModelParams p = small_params(7, cfg);
  SceneCache cache(p, false);
  EqaOptions eo;
  eo.teacher_navigation = true;
  eo.answerer = [](const World& world, const std::string& q, const std::vector<int>& positions) {
    return answer_from_world(world, q, positions).value_or("?");
  };
  Rng rng(7);
  for (int i = 0; i < 20; ++i) {
    const Episode ep = synth_eqa(w, rng, TaskConfig{});
    ASSERT_TRUE(ep.question.has_value());
    const EqaResult r = eqa(w, ep, p, rng, cache, {}, eo);
    EXPECT_EQ(r.positions, std::vector<int>{r.trajectory.visited.back()});
    EXPECT_TRUE(r.trajectory.streams.empty());
    EXPECT_EQ(r.trajectory.visited, *ep.gt_path);
    EXPECT_EQ(r.answer, *ep.qa_answer) << ep.episode_id;
  }
}

TEST(NavAgent, StageChecks) {
  const World w = line_world();
  const ModelParams p = small_params();
  SceneCache cache(p, false);
  Rng rng(8);
  Episode ep = objloc_on(0, 2);
  ep.kind = TaskKind::Qa;
  EXPECT_THROW(rollout(w, ep, p, RolloutMode::Teacher, rng, cache), SchemaError);
  ep.kind = TaskKind::Vln;
  ep.max_steps = 0;
  EXPECT_THROW(rollout(w, ep, p, RolloutMode::Teacher, rng, cache), ValidationError);
  EXPECT_THROW(eqa(w, ep, p, rng, cache), SchemaError);
  EXPECT_EQ(teacher_action(w, objloc_on(2, 2), 2), 0);
  EXPECT_EQ(teacher_action(w, objloc_on(0, 2), 0), w.candidate_id(0, 1));
}
