#include "navgen/pipeline.hpp"

#include "navgen/vocab.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

namespace navgen {

namespace fs = std::filesystem;

namespace {

std::string kind_file(TaskKind k) {
  std::string s(to_string(k));
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string join_ids(const std::vector<int>& ids) {
  std::string out;
  for (int v : ids) out += (out.empty() ? "" : " ") + std::to_string(v);
  return out;
}

int random_walk(const World&, int, int count, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, count);
  return pick(rng);
}

void add_nav(std::map<std::string, double>& m, const NavReport& r) {
  m["tl"] = r.tl;
  m["ne"] = r.ne;
  m["sr"] = r.sr;
  m["osr"] = r.osr;
  m["spl"] = r.spl;
  m["gp"] = r.gp;
}

void add_text(std::map<std::string, double>& m, const std::string& out, const std::vector<std::string>& refs) {
  m["em"] = em(out, refs);
  m["bleu4"] = bleu4(out, refs);
  m["rouge_l"] = rouge_l(out, refs);
  m["meteor"] = meteor_lite(out, refs);
}

}  // namespace

Datasets SplitData::datasets() const { return Datasets{worlds.get(), episodes}; }

std::string world_set_text(const std::vector<World>& worlds) {
  nlohmann::ordered_json doc;
  doc["format"] = "navgen-world-set";
  doc["version"] = 1;
  doc["worlds"] = nlohmann::ordered_json::array();
  for (const auto& w : worlds) doc["worlds"].push_back(world_to_json(w));
  return doc.dump() + "\n";
}

std::vector<World> parse_world_set(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("world set is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != "navgen-world-set") throw FormatError("not a navgen world set");
  const auto version = doc.at("version").get<std::uint32_t>();
  if (version != 1) throw VersionError(1, version);
  std::vector<World> out;
  for (const auto& w : doc.at("worlds")) out.push_back(world_from_json(w));
  return out;
}

std::vector<World> generate_worlds(const RunConfig& cfg, const std::string& split) {
  const SplitSpec& spec = cfg.splits.at(split);
  if (!spec.world_set.empty()) return generate_worlds(cfg, spec.world_set);
  std::vector<World> out;
  for (int i = 0; i < spec.worlds; ++i) out.push_back(generate_world(cfg.world_seed(split, i), cfg.world));
  return out;
}

std::vector<Episode> generate_episodes(const RunConfig& cfg, const std::string& split, TaskKind kind,
                                       const std::vector<World>& worlds) {
  const SplitSpec& spec = cfg.splits.at(split);
  const auto it = spec.episodes.find(kind);
  const int n = it == spec.episodes.end() ? 0 : it->second;
  std::vector<Episode> out;
  for (int j = 0; j < n; ++j) {
    Rng rng(cfg.episode_seed(split, kind, j));
    const int w = j % static_cast<int>(worlds.size());
    Episode ep = synth_episode(kind, worlds[static_cast<std::size_t>(w)], rng, cfg.tasks);
    ep.world = w;
    ep.episode_id = split + "-" + kind_file(kind) + "-" + std::to_string(j);
    out.push_back(std::move(ep));
  }
  return out;
}

std::map<std::string, SplitData> generate_data(const RunConfig& cfg) {
  std::map<std::string, SplitData> out;
  std::map<std::string, std::shared_ptr<const std::vector<World>>> owned;
  for (const auto& name : kSplitNames) {
    if (!cfg.splits.contains(name) || !cfg.splits.at(name).world_set.empty()) continue;
    owned[name] = std::make_shared<const std::vector<World>>(generate_worlds(cfg, name));
  }
  for (const auto& name : kSplitNames) {
    if (!cfg.splits.contains(name)) continue;
    const auto& spec = cfg.splits.at(name);
    SplitData d;
    d.name = name;
    d.worlds = owned.at(spec.world_set.empty() ? name : spec.world_set);
    d.world_ref = sha256_hex(world_set_text(*d.worlds));
    for (TaskKind k : kAllKinds) d.episodes[k] = generate_episodes(cfg, name, k, *d.worlds);
    out.emplace(name, std::move(d));
  }
  return out;
}

void write_data(const std::string& dir, const std::map<std::string, SplitData>& data) {
  for (const auto& [name, split] : data) {
    const fs::path sub = fs::path(dir) / name;
    std::error_code ec;
    fs::create_directories(sub, ec);
    if (ec) throw IoError("cannot create directory " + sub.string() + ": " + ec.message());
    write_file(sub / "worlds.json", world_set_text(*split.worlds));
    for (TaskKind k : kAllKinds) {
      const auto it = split.episodes.find(k);
      const std::vector<Episode> none;
      write_jsonl((sub / (kind_file(k) + ".jsonl")).string(), it == split.episodes.end() ? none : it->second,
                  split.world_ref);
    }
  }
}

SplitData load_split(const std::string& dir, const std::string& split) {
  const fs::path sub = fs::path(dir) / split;
  if (!fs::is_directory(sub)) throw IoError("split directory not found: " + sub.string());
  SplitData d;
  d.name = split;
  const std::string text = read_file(sub / "worlds.json");
  d.world_ref = sha256_hex(text);
  d.worlds = std::make_shared<const std::vector<World>>(parse_world_set(text));
  for (TaskKind k : kAllKinds) {
    const fs::path file = sub / (kind_file(k) + ".jsonl");
    if (!fs::exists(file)) continue;
    EpisodeFile ef = read_jsonl(file.string());
    if (ef.world_ref != d.world_ref) {
      throw FormatError(file.string() + " refers to a different world set (world_ref mismatch)");
    }
    for (const auto& ep : ef.episodes) {
      if (ep.kind != k) throw FormatError(file.string() + " holds an episode of kind " + std::string(to_string(ep.kind)));
      if (ep.world < 0 || ep.world >= static_cast<int>(d.worlds->size())) {
        throw FormatError("episode " + ep.episode_id + " refers to a missing world");
      }
      validate_against(ep, (*d.worlds)[static_cast<std::size_t>(ep.world)]);
    }
    d.episodes[k] = std::move(ef.episodes);
  }
  return d;
}

std::string data_counts_table(const std::map<std::string, SplitData>& data) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "split" << std::setw(8) << "worlds";
  for (TaskKind k : kAllKinds) out << std::setw(8) << to_string(k);
  out << '\n';
  for (const auto& name : kSplitNames) {
    if (!data.contains(name)) continue;
    const auto& d = data.at(name);
    out << std::setw(12) << name << std::setw(8) << d.worlds->size();
    for (TaskKind k : kAllKinds) {
      const auto it = d.episodes.find(k);
      out << std::setw(8) << (it == d.episodes.end() ? 0 : it->second.size());
    }
    out << '\n';
  }
  return out.str();
}

EvalOptions eval_options(const RunConfig& cfg) {
  EvalOptions o;
  o.threshold = cfg.eval.threshold;
  o.agent.explore_temperature = cfg.eval.explore_temperature;
  o.agent.exploration_kinds = cfg.eval.exploration_kinds;
  o.agent.answer_max_tokens = cfg.eval.answer_max_tokens;
  o.agent.summary_max_tokens = cfg.eval.summary_max_tokens;
  o.seed = cfg.eval_seed();
  return o;
}

std::vector<EpisodeRecord> evaluate(const SplitData& split, const ModelParams& params, const EvalOptions& options) {
  const auto& vocab = Vocabulary::standard();
  SceneCache cache(params, false);
  const Policy walk = random_walk;
  const Policy* policy = options.policy == EvalPolicy::RandomWalk ? &walk : nullptr;
  const RolloutMode nav_mode = options.policy == EvalPolicy::Oracle ? RolloutMode::Teacher : RolloutMode::Infer;
  std::vector<EpisodeRecord> records;
  for (TaskKind kind : options.kinds) {
    const auto it = split.episodes.find(kind);
    if (it == split.episodes.end()) continue;
    const auto& eps = it->second;
    const std::size_t n = options.max_episodes < 0 ? eps.size()
                                                   : std::min(eps.size(), static_cast<std::size_t>(options.max_episodes));
    std::vector<CiderItem> corpus;
    const std::size_t first = records.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Episode& ep = eps[i];
      const World& world = split.worlds->at(static_cast<std::size_t>(ep.world));
      Rng rng(derive_seed(derive_seed(options.seed, kind_file(kind)), static_cast<std::uint64_t>(i)));
      EpisodeRecord rec;
      rec.episode_id = ep.episode_id;
      rec.kind = kind;
      switch (kind) {
        case TaskKind::Vln: {
          Trajectory t = rollout(world, ep, params, nav_mode, rng, cache, options.agent, policy);
          add_nav(rec.metrics, nav_metrics(world, ep, t.visited, options.threshold));
          rec.output = join_ids(t.visited);
          break;
        }
        case TaskKind::ObjLoc: {
          Trajectory t = rollout(world, ep, params, nav_mode, rng, cache, options.agent, policy);
          const int selected = localize(world, ep, params, t, cache);
          const int available = static_cast<int>(world.viewpoint(t.visited.back()).objects.size());
          add_nav(rec.metrics, nav_metrics(world, ep, t.visited, options.threshold));
          const auto g = grounding_metrics(world, ep, t.visited, selected, options.threshold);
          rec.metrics["rgs"] = g.rgs;
          rec.metrics["rgspl"] = g.rgspl;
          rec.metrics["format_valid"] = selected >= 0 && selected <= available ? 1.0 : 0.0;
          // Object choice at the ground-truth goal, isolated from navigation.
          Trajectory at_goal;
          at_goal.visited = *ep.gt_path;
          const int goal_pick = localize(world, ep, params, at_goal, cache);
          const auto& target = *ep.target_object;
          rec.metrics["target_acc"] = goal_pick == target.object_id ? 1.0 : 0.0;
          const int goal_objects = static_cast<int>(world.viewpoint(target.viewpoint).objects.size());
          rec.metrics["chance_acc"] = 1.0 / static_cast<double>(goal_objects + 1);
          // Unconstrained output at the goal: must be a single in-range ID then EOS.
          const TokenStream prompt =
              grounding_stream(world, ep, target.viewpoint, trajectory_history(world, *ep.gt_path, cache), cache);
          DecodeOptions free;
          free.max_new = 2;
          const auto raw = decode(params, prompt, free, nullptr);
          const auto value = raw.size() == 1 ? vocab.marker_value(raw[0]) : std::nullopt;
          rec.metrics["free_format_valid"] = value && *value <= goal_objects ? 1.0 : 0.0;
          rec.output = join_ids(t.visited) + " | " + std::to_string(selected);
          break;
        }
        case TaskKind::Summ: {
          rec.output = summarize(world, ep, params, cache, options.agent);
          add_text(rec.metrics, rec.output, ep.references);
          corpus.push_back(CiderItem{rec.output, ep.references});
          break;
        }
        case TaskKind::Qa: {
          rec.output = answer_qa(world, ep.instruction, params, ep.positions, cache, options.agent);
          const auto fact = answer_from_world(world, ep.instruction, ep.positions);
          const std::vector<std::string> refs{fact.value_or(*ep.qa_answer)};
          add_text(rec.metrics, rec.output, refs);
          corpus.push_back(CiderItem{rec.output, refs});
          break;
        }
        case TaskKind::Eqa: {
          EqaOptions eo;
          eo.teacher_navigation = options.policy == EvalPolicy::Oracle;
          EqaResult r = [&] {
            if (options.policy != EvalPolicy::RandomWalk) return eqa(world, ep, params, rng, cache, options.agent, eo);
            EqaResult w;
            w.trajectory = rollout(world, ep, params, RolloutMode::Infer, rng, cache, options.agent, policy);
            w.positions = {w.trajectory.visited.back()};
            w.answer = answer_qa(world, *ep.question, params, w.positions, cache, options.agent);
            return w;
          }();
          add_nav(rec.metrics, nav_metrics(world, ep, r.trajectory.visited, options.threshold));
          rec.metrics["em"] = em(r.answer, {*ep.qa_answer});
          rec.output = join_ids(r.trajectory.visited) + " | " + r.answer;
          break;
        }
      }
      records.push_back(std::move(rec));
    }
    if (!corpus.empty()) {
      const auto scores = cider(corpus);
      for (std::size_t i = 0; i < scores.size(); ++i) records[first + i].metrics["cider"] = scores[i];
    }
  }
  return records;
}

TokenStream first_stream(const World& world, const Episode& ep, SceneCache& cache) {
  switch (ep.kind) {
    case TaskKind::Summ:
      return summary_stream(world, ep, cache, ep.references.front());
    case TaskKind::Qa:
      return qa_stream(world, ep.instruction, ep.positions, cache, ep.qa_answer);
    default:
      return navigation_stream(world, ep, ep.start, {}, cache, teacher_action(world, ep, ep.start));
  }
}

TrainState run_training(const RunConfig& cfg, const SplitData& train_split, const TrainRun& run) {
  Datasets data = train_split.datasets();
  TrainConfig tc = cfg.train;
  for (TaskKind k : run.exclude) {
    data.episodes.erase(k);
    if (!tc.weights.empty()) tc.weights[k] = 0.0;
  }
  TrainState state;
  if (run.resume) {
    const Checkpoint ck = load_checkpoint(*run.resume);
    state = restore_state(ck);
    if (model_config_to_json(state.params.config) != model_config_to_json([&] {
          ModelConfig m = cfg.model;
          m.vocab_size = m.resolved_vocab_size();
          return m;
        }())) {
      throw ConfigError("resume checkpoint was trained with a different model config");
    }
  } else {
    state = initial_state(cfg.model, cfg.init_seed());
  }
  train(data, tc, cfg.train_seed(), state, run.stop_at, run.hooks);
  return state;
}

nlohmann::json checkpoint_meta(const RunConfig& cfg, const TrainState& state, const std::vector<TaskKind>& exclude) {
  nlohmann::json meta;
  meta["config"] = cfg.to_json();
  meta["next_step"] = state.next_step;
  auto& ex = meta["exclude"];
  ex = nlohmann::json::array();
  for (TaskKind k : exclude) ex.push_back(kind_file(k));
  auto& losses = meta["losses"];
  losses = nlohmann::json::array();
  for (const auto& r : state.losses) {
    losses.push_back({r.step, r.loss, std::string(to_string(r.stage)), std::string(to_string(r.mode))});
  }
  return meta;
}

void save_state(const std::string& path, const RunConfig& cfg, const TrainState& state,
                const std::vector<TaskKind>& exclude) {
  save_checkpoint(path, state.params, state.adam, checkpoint_meta(cfg, state, exclude));
}

TrainState restore_state(const Checkpoint& ck) {
  TrainState s;
  s.params = ck.params;
  s.adam = ck.adam;
  s.next_step = ck.meta.value("next_step", 0);
  if (ck.meta.contains("losses")) {
    for (const auto& row : ck.meta.at("losses")) {
      LossRecord r;
      r.step = row.at(0).get<int>();
      r.loss = row.at(1).get<double>();
      r.stage = row.at(2).get<std::string>() == "pretrain" ? Stage::Pretrain : Stage::Finetune;
      const auto mode = row.at(3).get<std::string>();
      r.mode = mode == "student" ? RolloutMode::Student : RolloutMode::Teacher;
      s.losses.push_back(r);
    }
  }
  return s;
}

RunConfig checkpoint_config(const Checkpoint& ck) {
  if (!ck.meta.contains("config")) throw FormatError("checkpoint carries no run config");
  return RunConfig::from_json(ck.meta.at("config"));
}

}  // namespace navgen
