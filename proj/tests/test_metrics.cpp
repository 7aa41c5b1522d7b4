#include "helpers.hpp"
#include "navgen/metrics.hpp"

#include <gtest/gtest.h>

#include <limits>

using namespace navgen;
using namespace navgen::testing;

namespace {

// Expected values come from tests/oracles/text_metrics.py.
constexpr double kBleuSingle = 0.6598203338556885;
constexpr double kBleuMulti = 0.5946035575013605;
constexpr double kRouge = 0.75;
constexpr double kMeteorSwap = 0.9814814814814815;
constexpr double kMeteorIdentical6 = 0.9976851851851852;
constexpr double kCider[] = {6.885331649164524, 3.7706632983290462, 2.6933756729740645};

Episode line_episode() {
  Episode ep;
  ep.kind = TaskKind::ObjLoc;
  ep.start = 0;
  ep.goal_viewpoints = {2};
  ep.target_object = TargetObject{2, 1};
  return ep;
}

std::vector<std::vector<double>> all_pairs(const World& w) {
  const auto n = static_cast<std::size_t>(w.size());
  std::vector<std::vector<double>> d(n, std::vector<double>(n, std::numeric_limits<double>::infinity()));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0.0;
  for (const auto& e : w.edges()) {
    d[static_cast<std::size_t>(e.a)][static_cast<std::size_t>(e.b)] = e.length;
    d[static_cast<std::size_t>(e.b)][static_cast<std::size_t>(e.a)] = e.length;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  return d;
}

}  // namespace

TEST(NavMetrics, ShortestPathScoresPerfectly) {
  const World w = line_world();
  const NavReport r = nav_metrics(w, line_episode(), {0, 1, 2}, 0.5);
  EXPECT_DOUBLE_EQ(r.tl, 2.0);
  EXPECT_EQ(r.ne, 0.0);
  EXPECT_EQ(r.sr, 1.0);
  EXPECT_EQ(r.osr, 1.0);
  EXPECT_DOUBLE_EQ(r.spl, 1.0);
  EXPECT_DOUBLE_EQ(r.gp, 2.0);
}

TEST(NavMetrics, DetourHalvesSpl) {
  const World w = line_world();
  const NavReport r = nav_metrics(w, line_episode(), {0, 1, 0, 1, 2}, 0.5);
  EXPECT_DOUBLE_EQ(r.tl, 4.0);
  EXPECT_EQ(r.sr, 1.0);
  EXPECT_DOUBLE_EQ(r.spl, 0.5);
}

TEST(NavMetrics, OvershootCountsOnlyForOracleSuccess) {
  const World w = line_world();
  const NavReport r = nav_metrics(w, line_episode(), {0, 1, 2, 1}, 0.5);
  EXPECT_DOUBLE_EQ(r.ne, 1.0);
  EXPECT_EQ(r.sr, 0.0);
  EXPECT_EQ(r.osr, 1.0);
  EXPECT_EQ(r.spl, 0.0);
  EXPECT_DOUBLE_EQ(r.gp, 1.0);
  // Within the default 3 m radius the same path succeeds.
  EXPECT_EQ(nav_metrics(w, line_episode(), {0, 1, 2, 1}).sr, 1.0);
}

TEST(NavMetrics, StayingPutHasZeroProgress) {
  const World w = line_world();
  const NavReport r = nav_metrics(w, line_episode(), {0}, 0.5);
  EXPECT_EQ(r.tl, 0.0);
  EXPECT_EQ(r.gp, 0.0);
  EXPECT_EQ(r.sr, 0.0);
  Episode at_goal = line_episode();
  at_goal.start = 2;
  EXPECT_EQ(nav_metrics(w, at_goal, {2}, 0.5).spl, 1.0);
}

TEST(NavMetrics, RejectsInvalidTrajectories) {
  const World w = line_world();
  EXPECT_THROW(nav_metrics(w, line_episode(), {}, 0.5), ValidationError);
  EXPECT_THROW(nav_metrics(w, line_episode(), {1, 2}, 0.5), ValidationError);
  EXPECT_THROW(nav_metrics(w, line_episode(), {0, 2}, 0.5), ValidationError);
}

TEST(NavMetrics, RandomWalksMatchBruteForce) {
  const World w = generate_world(21, WorldConfig{});
  const auto d = all_pairs(w);
  Rng rng(21);
  std::uniform_int_distribution<int> pick(0, w.size() - 1);
  for (int trial = 0; trial < 100; ++trial) {
    Episode ep;
    ep.start = pick(rng);
    ep.goal_viewpoints = {pick(rng), pick(rng)};
    std::vector<int> walk{ep.start};
    const int steps = std::uniform_int_distribution<int>(0, 8)(rng);
    for (int s = 0; s < steps; ++s) {
      const auto& nb = w.neighbors(walk.back());
      walk.push_back(nb[std::uniform_int_distribution<std::size_t>(0, nb.size() - 1)(rng)]);
    }
    auto goal_d = [&](int v) {
      double best = std::numeric_limits<double>::infinity();
      for (int g : ep.goal_viewpoints) best = std::min(best, d[static_cast<std::size_t>(v)][static_cast<std::size_t>(g)]);
      return best;
    };
    double tl = 0.0, closest = goal_d(walk[0]);
    for (std::size_t i = 1; i < walk.size(); ++i) {
      tl += d[static_cast<std::size_t>(walk[i - 1])][static_cast<std::size_t>(walk[i])];
      closest = std::min(closest, goal_d(walk[i]));
    }
    const double l = goal_d(ep.start), ne = goal_d(walk.back());
    const double sr = ne <= 3.0 ? 1.0 : 0.0;
    const double spl = sr * (std::max(l, tl) > 0 ? l / std::max(l, tl) : 1.0);

    const NavReport r = nav_metrics(w, ep, walk);
    EXPECT_NEAR(r.tl, tl, 1e-9);
    EXPECT_NEAR(r.ne, ne, 1e-9);
    EXPECT_EQ(r.sr, sr);
    EXPECT_EQ(r.osr, closest <= 3.0 ? 1.0 : 0.0);
    EXPECT_NEAR(r.spl, spl, 1e-9);
    EXPECT_NEAR(r.gp, l - ne, 1e-9);
    EXPECT_LE(r.spl, r.sr);
    EXPECT_LE(r.sr, r.osr);
  }
}

TEST(GroundingMetrics, RequiresReachingAndSelecting) {
  const World w = line_world();
  const Episode ep = line_episode();
  auto g = grounding_metrics(w, ep, {0, 1, 2}, 1, 0.5);
  EXPECT_EQ(g.rgs, 1.0);
  EXPECT_DOUBLE_EQ(g.rgspl, 1.0);
  g = grounding_metrics(w, ep, {0, 1, 0, 1, 2}, 1, 0.5);
  EXPECT_EQ(g.rgs, 1.0);
  EXPECT_DOUBLE_EQ(g.rgspl, 0.5);
  EXPECT_EQ(grounding_metrics(w, ep, {0, 1, 2}, 0, 0.5).rgs, 0.0);
  EXPECT_EQ(grounding_metrics(w, ep, {0, 1}, 1, 0.5).rgs, 0.0);
  Episode no_target = ep;
  no_target.target_object.reset();
  EXPECT_THROW(grounding_metrics(w, no_target, {0}, 0, 0.5), ValidationError);
}

TEST(TextMetrics, ExactMatchNormalization) {
  const std::vector<std::string> answers{"sink", "cup", "3", "two chairs", "the red lamp"};
  int checked = 0;
  for (int i = 0; i < 50; ++i) {
    const std::string& a = answers[static_cast<std::size_t>(i) % answers.size()];
    std::string variant = a;
    switch (i % 5) {
      case 0: std::transform(variant.begin(), variant.end(), variant.begin(), ::toupper); break;
      case 1: variant = "  " + variant + "  "; break;
      case 2: variant += " ."; break;
      case 3: variant += "?"; break;
      default: {
        std::string spaced;
        for (char c : variant) spaced += c == ' ' ? std::string("   ") : std::string(1, c);
        variant = spaced;
      }
    }
    EXPECT_EQ(em(variant, {a}), 1.0) << "'" << variant << "'";
    EXPECT_EQ(em(variant + " x", {a}), 0.0);
    ++checked;
  }
  EXPECT_EQ(checked, 50);
  EXPECT_EQ(em("cup", {"sink", "CUP"}), 1.0);
  EXPECT_THROW(em("cup", {}), ValidationError);
}

TEST(TextMetrics, BleuMatchesOracle) {
  EXPECT_NEAR(bleu4("go to the arch then the piano stop", {"go to the arch then the sofa and stop"}), kBleuSingle, 1e-12);
  EXPECT_NEAR(bleu4("the sink is near the arch", {"a sink near the arch", "the sink is by the big arch ."}), kBleuMulti,
              1e-12);
  EXPECT_NEAR(bleu4("a b c d e", {"a b c d e"}), 1.0, 1e-12);
  EXPECT_EQ(bleu4("x y", {"a b"}), 0.0);
  EXPECT_EQ(bleu4("", {"a b"}), 0.0);
}

TEST(TextMetrics, RougeMatchesOracle) {
  EXPECT_NEAR(rouge_l("a b c d", {"a c d e"}), kRouge, 1e-12);
  EXPECT_NEAR(rouge_l("a b c", {"a b c"}), 1.0, 1e-12);
  EXPECT_EQ(rouge_l("x", {"a b c"}), 0.0);
}

TEST(TextMetrics, MeteorMatchesOracle) {
  EXPECT_NEAR(meteor_lite("the cat sat on the mat", {"on the mat the cat sat"}), kMeteorSwap, 1e-12);
  EXPECT_NEAR(meteor_lite("a b c d e f", {"a b c d e f"}), kMeteorIdentical6, 1e-12);
  EXPECT_EQ(meteor_lite("x", {"a"}), 0.0);
}

TEST(TextMetrics, CiderMatchesOracle) {
  const std::vector<CiderItem> corpus{
      {"go to the arch and stop", {"go to the arch and stop", "walk to the arch"}},
      {"walk past the piano", {"go past the piano then stop"}},
      {"the sink", {"sink", "the sink is here"}},
  };
  const auto scores = cider(corpus);
  ASSERT_EQ(scores.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(scores[i], kCider[i], 1e-9);
}

TEST(Aggregate, MeansAndPercentages) {
  std::vector<EpisodeRecord> records{
      {"a", TaskKind::Vln, {{"sr", 1.0}, {"ne", 2.0}}, ""},
      {"b", TaskKind::Vln, {{"sr", 0.0}, {"ne", 4.0}}, ""},
      {"c", TaskKind::Qa, {{"em", 1.0}}, "sink"},
  };
  const Summary s = aggregate(records);
  EXPECT_DOUBLE_EQ(s.per_kind.at("VLN").at("sr"), 50.0);
  EXPECT_DOUBLE_EQ(s.per_kind.at("VLN").at("ne"), 3.0);
  EXPECT_DOUBLE_EQ(s.per_kind.at("QA").at("em"), 100.0);
  EXPECT_EQ(s.counts.at("VLN"), 2u);
  EXPECT_EQ(s.counts.at("overall"), 3u);
  EXPECT_FALSE(s.per_kind.at("QA").contains("sr"));
  EXPECT_THROW(aggregate({}), EmptyReportError);
  const auto doc = report_json(s, records);
  EXPECT_EQ(doc.at("episodes").size(), 3u);
  EXPECT_NE(summary_csv(s).find("VLN"), std::string::npos);
}
