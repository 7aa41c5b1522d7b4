#include "navgen/pipeline.hpp"
#include "navgen/schema.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace navgen;

namespace {

enum Exit { kOk = 0, kConfig = 2, kData = 3, kNumeric = 4 };

RunConfig load_config(const std::string& path) { return path.empty() ? RunConfig::defaults() : RunConfig::load(path); }

std::vector<TaskKind> parse_kinds(const std::vector<std::string>& names) {
  std::vector<TaskKind> kinds;
  for (const auto& n : names) {
    try {
      kinds.push_back(parse_kind(n));
    } catch (const Error&) {
      throw ConfigError("unknown task kind: " + n);
    }
  }
  return kinds;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

struct GenData {
  std::string config;
  std::string out_dir;

  int run() const {
    const RunConfig cfg = load_config(config);
    const auto data = generate_data(cfg);
    write_data(out_dir, data);
    std::cout << data_counts_table(data);
    return kOk;
  }
};

struct Train {
  std::string config;
  std::string data;
  std::string out;
  std::string resume;
  std::vector<std::string> exclude;
  int stop_at = -1;
  bool quiet = false;

  int run() const {
    const RunConfig cfg = load_config(config);
    TrainRun tr;
    tr.exclude = parse_kinds(exclude);
    if (!resume.empty()) {
      if (!fs::exists(resume)) throw IoError("checkpoint not found: " + resume);
      tr.resume = resume;
    }
    if (stop_at >= 0) tr.stop_at = stop_at;
    const SplitData split = load_split(data, "train");
    const int total = cfg.train.total_steps();
    if (!quiet) {
      tr.hooks.on_step = [total](const LossRecord& r) {
        if (r.step % 100 == 0 || r.step + 1 == total) {
          std::cout << "step " << r.step << " " << to_string(r.stage) << "/" << to_string(r.mode) << " loss " << r.loss
                    << std::endl;
        }
      };
    }
    const TrainState state = run_training(cfg, split, tr);
    fs::create_directories(out);
    save_state((fs::path(out) / "checkpoint.nvgn").string(), cfg, state, tr.exclude);
    write_text(fs::path(out) / "loss.csv", loss_csv(state.losses));
    std::cout << "saved " << (fs::path(out) / "checkpoint.nvgn").string() << " at step " << state.next_step << "\n";
    return kOk;
  }
};

struct Eval {
  std::string checkpoint;
  std::string data;
  std::vector<std::string> tasks;
  std::vector<std::string> exclude;
  std::string split = "val_unseen";
  std::string report;
  bool oracle = false;
  bool random_walk = false;
  int max_episodes = -1;

  int run() const {
    if (oracle && random_walk) throw ConfigError("--oracle-policy and --random-walk are exclusive");
    if (!fs::exists(checkpoint)) throw IoError("checkpoint not found: " + checkpoint);
    const Checkpoint ck = load_checkpoint(checkpoint);
    const RunConfig cfg = checkpoint_config(ck);
    EvalOptions opts = eval_options(cfg);
    if (!tasks.empty()) opts.kinds = parse_kinds(tasks);
    for (TaskKind k : parse_kinds(exclude)) std::erase(opts.kinds, k);
    if (oracle) opts.policy = EvalPolicy::Oracle;
    if (random_walk) opts.policy = EvalPolicy::RandomWalk;
    opts.max_episodes = max_episodes;
    const SplitData s = load_split(data, split);
    const auto records = evaluate(s, ck.params, opts);
    const Summary summary = aggregate(records);
    std::cout << summary_table(summary);
    if (!report.empty()) {
      write_text(report, report_json(summary, records).dump(2) + "\n");
      write_text(fs::path(report).replace_extension(".csv"), summary_csv(summary));
    }
    return kOk;
  }
};

struct Inspect {
  std::string episode;
  std::string id;
  std::string checkpoint;
  std::string config;

  int run() const {
    const fs::path file(episode);
    const EpisodeFile ef = read_jsonl(file.string());
    const fs::path worlds_path = file.parent_path() / "worlds.json";
    std::ifstream in(worlds_path, std::ios::binary);
    if (!in) throw IoError("cannot read " + worlds_path.string());
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    if (sha256_hex(text) != ef.world_ref) throw FormatError(file.string() + " does not match " + worlds_path.string());
    const auto worlds = parse_world_set(text);

    const Episode* ep = ef.episodes.empty() ? nullptr : &ef.episodes.front();
    if (!id.empty()) {
      ep = nullptr;
      for (const auto& e : ef.episodes)
        if (e.episode_id == id) ep = &e;
      if (!ep) throw LookupError("no episode " + id + " in " + file.string());
    }
    if (!ep) throw LookupError("no episodes in " + file.string());
    const World& world = worlds.at(static_cast<std::size_t>(ep->world));

    std::optional<Checkpoint> ck;
    if (!checkpoint.empty()) {
      if (!fs::exists(checkpoint)) throw IoError("checkpoint not found: " + checkpoint);
      ck = load_checkpoint(checkpoint);
    }
    const RunConfig cfg = ck ? checkpoint_config(*ck) : load_config(config);
    const ModelParams params = ck ? ck->params : initial_state(cfg.model, cfg.init_seed()).params;
    SceneCache cache(params, false);

    std::cout << "# episode " << ep->episode_id << " " << to_string(ep->kind) << "\n";
    std::cout << dump_stream(first_stream(world, *ep, cache));
    if (!ck) return kOk;

    const EvalOptions opts = eval_options(cfg);
    Rng rng(derive_seed(derive_seed(opts.seed, "inspect"), ep->episode_id));
    nlohmann::ordered_json trace;
    trace["episode_id"] = ep->episode_id;
    trace["kind"] = std::string(to_string(ep->kind));
    auto nav = [&](const Trajectory& t) {
      trace["visited"] = t.visited;
      trace["chosen"] = t.chosen;
      trace["teacher"] = t.teacher;
      trace["stopped"] = t.stopped;
    };
    switch (ep->kind) {
      case TaskKind::Vln:
      case TaskKind::ObjLoc: {
        const Trajectory t = rollout(world, *ep, params, RolloutMode::Infer, rng, cache, opts.agent);
        nav(t);
        if (ep->kind == TaskKind::ObjLoc) trace["selected"] = localize(world, *ep, params, t, cache);
        break;
      }
      case TaskKind::Eqa: {
        const EqaResult r = eqa(world, *ep, params, rng, cache, opts.agent);
        nav(r.trajectory);
        trace["answer"] = r.answer;
        break;
      }
      case TaskKind::Summ:
        trace["output"] = summarize(world, *ep, params, cache, opts.agent);
        break;
      case TaskKind::Qa:
        trace["output"] = answer_qa(world, ep->instruction, params, ep->positions, cache, opts.agent);
        break;
    }
    std::cout << "# trace\n" << trace.dump(2) << "\n";
    return kOk;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"navgen: synthetic navigation worlds, schema streams, training and evaluation"};
  app.require_subcommand(1);

  GenData gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate worlds and episode files for every split");
  gen_cmd->add_option("--config", gen.config, "Run config (JSON); defaults if omitted");
  gen_cmd->add_option("--out-dir", gen.out_dir, "Output directory")->required();

  Train train;
  auto* train_cmd = app.add_subcommand("train", "Run the two-stage training schedule");
  train_cmd->add_option("--config", train.config, "Run config (JSON); defaults if omitted");
  train_cmd->add_option("--data", train.data, "Data directory from gen-data")->required();
  train_cmd->add_option("--out", train.out, "Output directory for checkpoint.nvgn and loss.csv")->required();
  train_cmd->add_option("--resume", train.resume, "Continue from a checkpoint");
  train_cmd->add_option("--exclude-kind", train.exclude, "Task kind left out of training (repeatable)");
  train_cmd->add_option("--stop-at", train.stop_at, "Stop before this global step");
  train_cmd->add_flag("--quiet", train.quiet, "No per-step progress");

  Eval ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--data", ev.data, "Data directory from gen-data")->required();
  eval_cmd->add_option("--tasks", ev.tasks, "Task kinds to evaluate (default all)")->delimiter(',');
  eval_cmd->add_option("--exclude-kind", ev.exclude, "Task kind to skip (repeatable)");
  eval_cmd->add_option("--split", ev.split, "Split to evaluate")->check(CLI::IsMember(kSplitNames));
  eval_cmd->add_option("--report", ev.report, "JSON report path; a CSV summary is written next to it");
  eval_cmd->add_flag("--oracle-policy", ev.oracle, "Navigate with teacher actions");
  eval_cmd->add_flag("--random-walk", ev.random_walk, "Navigate with uniform random actions");
  eval_cmd->add_option("--max-episodes", ev.max_episodes, "Episodes per kind (default all)");

  Inspect ins;
  auto* inspect_cmd = app.add_subcommand("inspect", "Dump an episode's stream and optional trajectory trace");
  inspect_cmd->add_option("--episode", ins.episode, "Episode JSONL file (worlds.json alongside)")->required();
  inspect_cmd->add_option("--id", ins.id, "Episode id (default first)");
  inspect_cmd->add_option("--checkpoint", ins.checkpoint, "Checkpoint for slot vectors and the trace");
  inspect_cmd->add_option("--config", ins.config, "Run config when no checkpoint is given");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*gen_cmd) return gen.run();
    if (*train_cmd) return train.run();
    if (*eval_cmd) return ev.run();
    if (*inspect_cmd) return ins.run();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const NumericAbort& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return kNumeric;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}
