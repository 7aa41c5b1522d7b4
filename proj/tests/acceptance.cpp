// Acceptance run: one PASS/FAIL line per criterion. Exits 0 when every
// criterion ran (pass or fail), 1 if the harness itself broke.

#include "helpers.hpp"
#include "reference.hpp"
#include "navgen/metrics.hpp"
#include "navgen/model.hpp"
#include "navgen/pipeline.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>

using namespace navgen;
using namespace navgen::testing;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and thresholds.
constexpr double kForwardTol = 1e-10;
constexpr double kGradTol = 1e-4;
constexpr int kGradCoords = 50;
constexpr double kUniformTol = 1e-12;
constexpr int kDecodeTrials = 10000;
constexpr double kAgreement = 0.9999;
constexpr double kTopGap = 0.5;
constexpr double kNavTol = 1e-9;
constexpr int kNavCases = 100;
constexpr double kTextTol = 1e-6;
constexpr int kTeacherEpisodes = 500;
constexpr int kDeterminismSteps = 10;
constexpr std::size_t kSmoothWindow = 100;
constexpr double kLossRatio = 0.5;
constexpr double kSeenSr = 80.0;
constexpr double kUnseenSr = 50.0;
constexpr double kRandomWalkFactor = 5.0;
constexpr double kObjlocAcc = 90.0;
constexpr double kQaAcc = 85.0;

struct Check {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) ok = false;
    detail << (detail.tellp() > 0 ? "; " : "") << what << (cond ? "" : " [X]");
  }
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream o;
  o.precision(prec);
  o << v;
  return o.str();
}

void report(int n, const std::string& name, const Check& c, double seconds) {
  std::cout << "CRITERION " << n << " " << (c.ok ? "PASS" : "FAIL") << "  " << name << "  (" << fmt(seconds, 3)
            << " s)\n    " << c.detail.str() << "\n"
            << std::flush;
}

double mean_metric(const std::vector<EpisodeRecord>& records, const std::string& name) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& r : records) {
    if (auto it = r.metrics.find(name); it != r.metrics.end()) {
      s += it->second;
      ++n;
    }
  }
  return n ? 100.0 * s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

std::vector<EpisodeRecord> run_eval(const SplitData& split, const ModelParams& params, const RunConfig& cfg,
                                    std::vector<TaskKind> kinds, EvalPolicy policy = EvalPolicy::Model) {
  EvalOptions o = eval_options(cfg);
  o.kinds = std::move(kinds);
  o.policy = policy;
  return evaluate(split, params, o);
}

// ---------------------------------------------------------------------------

Check schema_fidelity() {
  Check c;
  const auto& vocab = Vocabulary::standard();
  int golden_ok = 0;
  for (TaskKind k : kAllKinds) {
    std::string name(to_string(k));
    std::transform(name.begin(), name.end(), name.begin(), ::tolower);
    std::ifstream in(fs::path(NAVGEN_GOLDEN_DIR) / (name + ".txt"));
    const std::string stored{std::istreambuf_iterator<char>(in), {}};
    golden_ok += !stored.empty() && stored == golden_dump(k);
  }
  c.require(golden_ok == 5, "goldens byte-exact " + std::to_string(golden_ok) + "/5");

  const World w = generate_world(5, small_world_config(20));
  const ModelParams p = small_params(5);
  SceneCache cache(p, false);
  bool marker_first = true, qa_no_history = true, vln_stop = false, objloc_none = false;
  auto followed_by = [&](const TokenStream& s, int marker, SlotTag tag) {
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      if (s.is_text(i) && s.token(i) == marker && !s.is_text(i + 1) && s.slot(i + 1).tag == tag) return true;
    }
    return false;
  };
  for (TaskKind k : kAllKinds) {
    Rng rng(derive_seed(11, static_cast<std::uint64_t>(k)));
    for (int i = 0; i < 20; ++i) {
      const Episode ep = synth_episode(k, w, rng, TaskConfig{});
      std::vector<TokenStream> streams{first_stream(w, ep, cache)};
      if (k == TaskKind::ObjLoc) streams.push_back(grounding_stream(w, ep, ep.gt_path->back(), {}, cache));
      for (const auto& s : streams) {
        for (std::size_t j = 0; j < s.size(); ++j) {
          if (s.is_text(j)) continue;
          marker_first = marker_first && j > 0 && s.is_text(j - 1) && vocab.marker_value(s.token(j - 1)).has_value();
          if (k == TaskKind::Qa) qa_no_history = qa_no_history && s.slot(j).tag != SlotTag::History;
        }
        if (k == TaskKind::Qa) {
          for (std::size_t j = 0; j < s.size(); ++j) {
            qa_no_history = qa_no_history && !(s.is_text(j) && vocab.word(s.token(j)) == "history");
          }
        }
      }
      if (k == TaskKind::Vln && i == 0) vln_stop = followed_by(streams[0], vocab.marker(0), SlotTag::View);
      if (k == TaskKind::ObjLoc && i == 0) objloc_none = followed_by(streams[1], vocab.marker(0), SlotTag::Object);
    }
  }
  c.require(marker_first, "marker precedes every slot");
  c.require(qa_no_history, "QA has no history block");
  c.require(vln_stop, "VLN offers (0) stop");
  c.require(objloc_none, "OBJLOC offers (0) not-exist");
  return c;
}

Check metric_oracles() {
  Check c;
  const World w = generate_world(21, WorldConfig{});
  const std::size_t n = static_cast<std::size_t>(w.size());
  std::vector<std::vector<double>> d(n, std::vector<double>(n, std::numeric_limits<double>::infinity()));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0.0;
  for (const auto& e : w.edges()) {
    d[static_cast<std::size_t>(e.a)][static_cast<std::size_t>(e.b)] = e.length;
    d[static_cast<std::size_t>(e.b)][static_cast<std::size_t>(e.a)] = e.length;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);

  Rng rng(77);
  std::uniform_int_distribution<int> pick(0, w.size() - 1);
  double worst = 0.0, worst_gp = 0.0;
  bool ordered = true;
  for (int t = 0; t < kNavCases; ++t) {
    Episode ep;
    ep.start = pick(rng);
    ep.goal_viewpoints = {pick(rng)};
    if (t % 3 == 0) ep.goal_viewpoints.push_back(pick(rng));
    std::vector<int> walk{ep.start};
    const int steps = std::uniform_int_distribution<int>(0, 10)(rng);
    for (int s = 0; s < steps; ++s) {
      const auto& nb = w.neighbors(walk.back());
      walk.push_back(nb[std::uniform_int_distribution<std::size_t>(0, nb.size() - 1)(rng)]);
    }
    auto gd = [&](int v) {
      double b = std::numeric_limits<double>::infinity();
      for (int g : ep.goal_viewpoints) b = std::min(b, d[static_cast<std::size_t>(v)][static_cast<std::size_t>(g)]);
      return b;
    };
    double tl = 0.0, closest = gd(walk[0]);
    for (std::size_t i = 1; i < walk.size(); ++i) {
      tl += d[static_cast<std::size_t>(walk[i - 1])][static_cast<std::size_t>(walk[i])];
      closest = std::min(closest, gd(walk[i]));
    }
    const double l = gd(ep.start), ne = gd(walk.back());
    const double sr = ne <= 3.0 ? 1.0 : 0.0;
    const double osr = closest <= 3.0 ? 1.0 : 0.0;
    const double spl = sr * (std::max(l, tl) > 0 ? l / std::max(l, tl) : 1.0);
    const NavReport r = nav_metrics(w, ep, walk);
    for (double diff : {r.tl - tl, r.ne - ne, r.sr - sr, r.osr - osr, r.spl - spl, r.gp - (l - ne)}) {
      worst = std::max(worst, std::abs(diff));
    }
    worst_gp = std::max(worst_gp, std::abs(r.gp - (l - r.ne)));
    ordered = ordered && r.spl <= r.sr && r.sr <= r.osr;
  }
  c.require(worst <= kNavTol, "nav brute force max err " + fmt(worst));
  c.require(ordered, "SPL <= SR <= OSR");
  c.require(worst_gp <= kNavTol, "GP = l - NE err " + fmt(worst_gp));

  // Hand oracle values (tests/oracles/text_metrics.py).
  double text_err = 0.0;
  auto track = [&](double got, double want) { text_err = std::max(text_err, std::abs(got - want)); };
  track(bleu4("go to the arch then the piano stop", {"go to the arch then the sofa and stop"}), 0.6598203338556885);
  track(bleu4("the sink is near the arch", {"a sink near the arch", "the sink is by the big arch ."}),
        0.5946035575013605);
  track(rouge_l("a b c d", {"a c d e"}), 0.75);
  track(meteor_lite("the cat sat on the mat", {"on the mat the cat sat"}), 0.9814814814814815);
  track(meteor_lite("a b c d e f", {"a b c d e f"}), 0.9976851851851852);
  const auto cd = cider({{"go to the arch and stop", {"go to the arch and stop", "walk to the arch"}},
                         {"walk past the piano", {"go past the piano then stop"}},
                         {"the sink", {"sink", "the sink is here"}}});
  track(cd[0], 6.885331649164524);
  track(cd[1], 3.7706632983290462);
  track(cd[2], 2.6933756729740645);
  track(em("  The Sink .", {"the sink"}), 1.0);
  track(em("sink", {"cup"}), 0.0);
  c.require(text_err <= kTextTol, "text oracles max err " + fmt(text_err));
  const double single = cider({{"go to the arch", {"go to the arch"}}})[0];
  c.require(single == 0.0, "CIDEr single-item corpus " + fmt(single));
  return c;
}

ModelParams jittered(std::uint64_t seed, const ModelConfig& cfg) {
  ModelParams p = small_params(seed, cfg);
  Rng rng(seed + 1000);
  std::normal_distribution<double> n(0.0, 0.05);
  for_each_tensor(p, [&](const std::string&, Matrix& m) { m = m.unaryExpr([&](double v) { return v + n(rng); }); });
  return p;
}

TokenStream mixed_stream(Rng& rng, int length, int span) {
  const auto& vocab = Vocabulary::standard();
  std::uniform_int_distribution<int> tok(2, vocab.size() - 1);
  std::normal_distribution<double> n(0.0, 0.5);
  TokenStream s;
  s.elements.emplace_back(TextElement{vocab.bos()});
  s.elements.emplace_back(TextElement{vocab.marker(2)});
  for (int i = 2; i < length - span; ++i) {
    if (i % 4 == 2) {
      s.elements.emplace_back(SlotElement{SlotTag::View, RowVector::NullaryExpr(16, [&]() { return n(rng); }), {}});
    } else {
      s.elements.emplace_back(TextElement{tok(rng)});
    }
  }
  const std::size_t begin = s.size();
  for (int i = 0; i < span; ++i) s.elements.emplace_back(TextElement{tok(rng)});
  s.target_span = TargetSpan{begin, s.size()};
  return s;
}

Check numeric_core() {
  Check c;
  const auto& vocab = Vocabulary::standard();
  Rng rng(31);

  double fwd = 0.0;
  for (bool tied : {true, false}) {
    for (bool shared : {true, false}) {
      ModelConfig cfg = small_model_config();
      cfg.tie_embeddings = tied;
      cfg.shared_id_embeddings = shared;
      const ModelParams p = jittered(32, cfg);
      const TokenStream s = mixed_stream(rng, 16, 3);
      const Matrix got = forward(p, s);
      const auto want = reference::decoder_logits(p, s);
      for (Eigen::Index i = 0; i < got.rows(); ++i)
        for (Eigen::Index j = 0; j < got.cols(); ++j)
          fwd = std::max(fwd, std::abs(got(i, j) - want[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]));
    }
  }
  c.require(fwd <= kForwardTol, "forward vs reference " + fmt(fwd));

  ModelParams p = jittered(33, small_model_config());
  const TokenStream s = mixed_stream(rng, 16, 4);
  const StreamGradient g = grad(p, s);
  auto tensors = tensor_list(p);
  const auto gt = tensor_list(g.params);
  std::vector<std::pair<std::size_t, Eigen::Index>> active;
  for (std::size_t t = 0; t < gt.size(); ++t)
    for (Eigen::Index i = 0; i < gt[t].second->size(); ++i)
      if (std::abs(gt[t].second->data()[i]) > 1e-7) active.emplace_back(t, i);
  std::shuffle(active.begin(), active.end(), rng);
  double worst = 0.0;
  for (int k = 0; k < kGradCoords; ++k) {
    const auto [t, i] = active[static_cast<std::size_t>(k)];
    double& x = tensors[t].second->data()[i];
    const double keep = x, h = 1e-5;
    x = keep + h;
    const double up = loss(p, s);
    x = keep - h;
    const double down = loss(p, s);
    x = keep;
    worst = std::max(worst, rel_error(gt[t].second->data()[i], (up - down) / (2 * h)));
  }
  c.require(worst <= kGradTol, std::to_string(kGradCoords) + " FD coords max rel " + fmt(worst));

  ModelParams flat = p;
  flat.decoder.final_norm.gain.setZero();
  flat.decoder.final_norm.shift.setZero();
  const double uni = std::abs(loss(flat, s) - std::log(static_cast<double>(vocab.size())));
  c.require(uni <= kUniformTol, "uniform loss - ln V " + fmt(uni));

  ModelParams hot = p;
  hot.decoder.final_norm.gain *= 50.0;
  const Matrix logits = forward(hot, s);
  const RowVector last = logits.row(logits.rows() - 1);
  DecodeOptions o;
  o.mode = DecodeOptions::Mode::Sample;
  o.allowed = std::vector<int>{vocab.marker(0), vocab.marker(1), vocab.marker(2)};
  int outside = 0;
  for (int t = 0; t < kDecodeTrials; ++t) {
    const int tok = select_token(last, o, true, vocab.eos(), &rng);
    outside += std::find(o.allowed->begin(), o.allowed->end(), tok) == o.allowed->end();
  }
  c.require(outside == 0, "constrained decode outside-set draws " + std::to_string(outside) + "/" +
                              std::to_string(kDecodeTrials));

  DecodeOptions greedy, cold;
  cold.mode = DecodeOptions::Mode::Sample;
  cold.temperature = 0.01;
  std::normal_distribution<double> nd(0.0, 3.0);
  int prompts = 0, agree = 0;
  while (prompts < 20000) {
    RowVector l = RowVector::NullaryExpr(50, [&]() { return nd(rng); });
    Eigen::Index top;
    const double best = l.maxCoeff(&top);
    l[top] = -std::numeric_limits<double>::infinity();
    const double second = l.maxCoeff();
    l[top] = best;
    if (best - second < kTopGap) continue;
    ++prompts;
    agree += select_token(l, cold, true, 1, &rng) == select_token(l, greedy, true, 1, nullptr);
  }
  const double rate = static_cast<double>(agree) / prompts;
  c.require(rate >= kAgreement, "T=0.01 vs greedy agreement " + fmt(rate, 6));
  return c;
}

Check rollout_harness(const RunConfig& cfg, const std::map<std::string, SplitData>& data) {
  Check c;
  const SplitData& train = data.at("train");
  const ModelParams p = initial_state(cfg.model, cfg.init_seed()).params;
  SceneCache cache(p, false);
  Rng rng(41);
  int reproduced = 0;
  for (int i = 0; i < kTeacherEpisodes; ++i) {
    const auto& pool = train.episodes.at(TaskKind::Vln);
    const Episode& ep = pool[static_cast<std::size_t>(i) % pool.size()];
    const Trajectory t = rollout(train.worlds->at(static_cast<std::size_t>(ep.world)), ep, p, RolloutMode::Teacher,
                                 rng, cache);
    reproduced += t.visited == *ep.gt_path && t.stopped;
  }
  c.require(reproduced == kTeacherEpisodes,
            "teacher reproduces gt_path " + std::to_string(reproduced) + "/" + std::to_string(kTeacherEpisodes));

  const auto oracle = run_eval(data.at("val_seen"), p, cfg, {TaskKind::Vln}, EvalPolicy::Oracle);
  const double sr = mean_metric(oracle, "sr"), spl = mean_metric(oracle, "spl");
  c.require(sr == 100.0 && spl == 100.0, "oracle policy SR " + fmt(sr) + "% SPL " + fmt(spl / 100.0));

  TrainRun run;
  run.stop_at = kDeterminismSteps;
  const TrainState a = run_training(cfg, train, run);
  const TrainState b = run_training(cfg, train, run);
  bool same = a.losses.size() == b.losses.size() && !a.losses.empty();
  for (std::size_t i = 0; same && i < a.losses.size(); ++i) same = a.losses[i].loss == b.losses[i].loss;
  c.require(same, "bitwise loss sequence over " + std::to_string(kDeterminismSteps) + " steps");
  return c;
}

TrainState train_or_reuse(const RunConfig& cfg, const SplitData& train, const fs::path& ckpt,
                          const std::vector<TaskKind>& exclude, bool reuse) {
  if (reuse && fs::exists(ckpt)) {
    const Checkpoint ck = load_checkpoint(ckpt.string());
    if (ck.meta.at("next_step").get<int>() == cfg.train.total_steps()) {
      std::cout << "    reusing " << ckpt.string() << "\n";
      return restore_state(ck);
    }
  }
  TrainRun run;
  run.exclude = exclude;
  run.hooks.on_step = [](const LossRecord& r) {
    if (r.step % 500 == 0) std::cout << "    step " << r.step << " loss " << fmt(r.loss) << "\n" << std::flush;
  };
  const TrainState st = run_training(cfg, train, run);
  save_state(ckpt.string(), cfg, st, exclude);
  return st;
}

Check toy_learning(const RunConfig& cfg, const std::map<std::string, SplitData>& data, const TrainState& st) {
  Check c;
  bool finite = true;
  for (const auto& r : st.losses) finite = finite && std::isfinite(r.loss);
  const double head = smoothed_head(st.losses, kSmoothWindow), tail = smoothed_tail(st.losses, kSmoothWindow);
  c.require(finite, "loss finite at all " + std::to_string(st.losses.size()) + " steps");
  c.require(tail <= kLossRatio * head, "smoothed loss " + fmt(head) + " -> " + fmt(tail));

  const auto seen = run_eval(data.at("val_seen"), st.params, cfg, {TaskKind::Vln, TaskKind::ObjLoc, TaskKind::Qa});
  const auto unseen = run_eval(data.at("val_unseen"), st.params, cfg, {TaskKind::Vln});
  const auto walk = run_eval(data.at("val_unseen"), st.params, cfg, {TaskKind::Vln}, EvalPolicy::RandomWalk);
  auto of_kind = [](const std::vector<EpisodeRecord>& rs, TaskKind k) {
    std::vector<EpisodeRecord> out;
    for (const auto& r : rs)
      if (r.kind == k) out.push_back(r);
    return out;
  };
  const double seen_sr = mean_metric(of_kind(seen, TaskKind::Vln), "sr");
  const double unseen_sr = mean_metric(unseen, "sr");
  const double walk_sr = mean_metric(walk, "sr");
  const double objloc = mean_metric(of_kind(seen, TaskKind::ObjLoc), "target_acc");
  const double qa = mean_metric(of_kind(seen, TaskKind::Qa), "em");
  c.require(seen_sr >= kSeenSr, "val_seen VLN SR " + fmt(seen_sr) + "%");
  c.require(unseen_sr >= kUnseenSr, "val_unseen VLN SR " + fmt(unseen_sr) + "%");
  c.require(unseen_sr > kRandomWalkFactor * walk_sr, "random-walk SR " + fmt(walk_sr) + "%");
  c.require(objloc >= kObjlocAcc, "OBJLOC target-id acc " + fmt(objloc) + "%");
  c.require(qa >= kQaAcc, "QA fact acc " + fmt(qa) + "%");
  return c;
}

Check held_out(const RunConfig& cfg, const std::map<std::string, SplitData>& data, const TrainState& st) {
  Check c;
  const auto recs = run_eval(data.at("val_unseen"), st.params, cfg, {TaskKind::ObjLoc});
  const double valid = mean_metric(recs, "format_valid");
  const double free_valid = mean_metric(recs, "free_format_valid");
  const double acc = mean_metric(recs, "target_acc"), chance = mean_metric(recs, "chance_acc");
  c.require(valid == 100.0, "format-valid OBJLOC outputs " + fmt(valid) + "%");
  c.require(acc > chance, "target-id acc " + fmt(acc) + "% vs uniform pick " + fmt(chance) + "%");
  c.detail << "; unconstrained format-valid " << fmt(free_valid) << "% (info)";
  return c;
}

Check eqa_composition(const RunConfig& cfg, const std::map<std::string, SplitData>& data, const TrainState& st) {
  Check c;
  const SplitData& split = data.at("val_seen");
  std::map<std::string, int> answers;
  for (const auto& ep : split.episodes.at(TaskKind::Eqa)) answers[*ep.qa_answer]++;
  int top = 0;
  for (const auto& [a, n] : answers) top = std::max(top, n);
  const double majority = 100.0 * top / static_cast<double>(split.episodes.at(TaskKind::Eqa).size());
  const double zero_shot = mean_metric(run_eval(split, st.params, cfg, {TaskKind::Eqa}), "em");
  const double teacher = mean_metric(run_eval(split, st.params, cfg, {TaskKind::Eqa}, EvalPolicy::Oracle), "em");
  c.require(zero_shot > majority, "zero-shot EQA acc " + fmt(zero_shot) + "% vs majority " + fmt(majority) + "%");
  c.require(teacher >= zero_shot, "teacher-navigation EQA acc " + fmt(teacher) + "%");
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"navgen acceptance criteria"};
  std::string work = (fs::temp_directory_path() / "navgen_acceptance").string();
  std::vector<int> only;
  bool reuse = false;
  app.add_option("--work", work, "Working directory for data and checkpoints");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_flag("--reuse", reuse, "Reuse finished checkpoints found in --work");
  CLI11_PARSE(app, argc, argv);
  auto wanted = [&](int n) { return only.empty() || std::find(only.begin(), only.end(), n) != only.end(); };

  try {
    using clock = std::chrono::steady_clock;
    auto timed = [&](int n, const std::string& name, auto&& fn) {
      if (!wanted(n)) return;
      const auto t0 = clock::now();
      const Check c = fn();
      report(n, name, c, std::chrono::duration<double>(clock::now() - t0).count());
    };
    timed(1, "schema fidelity", schema_fidelity);
    timed(2, "metric oracles", metric_oracles);
    timed(3, "numeric core", numeric_core);

    if (!(wanted(4) || wanted(5) || wanted(6) || wanted(7))) return 0;
    fs::create_directories(work);
    const RunConfig cfg = RunConfig::defaults();
    const auto data = generate_data(cfg);
    timed(4, "rollout harness", [&] { return rollout_harness(cfg, data); });

    std::optional<TrainState> multi;
    const auto t_multi = clock::now();
    if (wanted(5) || wanted(7)) multi = train_or_reuse(cfg, data.at("train"), fs::path(work) / "multitask.nvgn", {}, reuse);
    const double train_s = std::chrono::duration<double>(clock::now() - t_multi).count();
    timed(5, "toy learning", [&] {
      Check c = toy_learning(cfg, data, *multi);
      c.detail << "; training " << fmt(train_s, 4) << " s";
      return c;
    });
    timed(6, "held-out generalization", [&] {
      const TrainState held =
          train_or_reuse(cfg, data.at("train"), fs::path(work) / "heldout_objloc.nvgn", {TaskKind::ObjLoc}, reuse);
      return held_out(cfg, data, held);
    });
    timed(7, "EQA composition", [&] { return eqa_composition(cfg, data, *multi); });
  } catch (const std::exception& e) {
    std::cerr << "acceptance harness error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
