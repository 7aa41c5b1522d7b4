#include "helpers.hpp"
#include "navgen/config.hpp"
#include "navgen/trainer.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>

using namespace navgen;
namespace fs = std::filesystem;

namespace {

const nlohmann::json kTinyConfig = nlohmann::json::parse(R"({
  "seed": 3,
  "world": {"num_viewpoints": 12, "n_views": 12, "d_feat": 8, "max_degree": 4, "box": [12.0, 12.0, 2.0]},
  "model": {"d_model": 16, "n_layers": 1, "n_heads": 2, "fuse_layers": 1, "fuse_heads": 2, "d_feat": 8,
            "angle_freqs": 2},
  "tasks": {"splits": {
    "train": {"worlds": 1, "episodes": {"vln": 6, "objloc": 6, "summ": 6, "qa": 6, "eqa": 0}},
    "val_seen": {"world_set": "train", "worlds": 0, "episodes": {"vln": 2, "objloc": 2, "summ": 2, "qa": 2, "eqa": 2}},
    "val_unseen": {"worlds": 1, "episodes": {"vln": 2, "objloc": 2, "summ": 2, "qa": 2, "eqa": 2}}
  }},
  "train": {"pretrain_steps": 2, "finetune_steps": 2, "batch_size": 2}
})");

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "navgen_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string write_config(const fs::path& dir, const nlohmann::json& doc) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << doc.dump(2);
  return p.string();
}

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(NAVGEN_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  const RunConfig c = RunConfig::defaults();
  const RunConfig back = RunConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json().dump(), c.to_json().dump());
  EXPECT_NE(c.train_seed(), c.eval_seed());
  EXPECT_NE(c.world_seed("train", 0), c.world_seed("val_unseen", 0));
  EXPECT_NE(c.episode_seed("train", TaskKind::Vln, 0), c.episode_seed("train", TaskKind::Qa, 0));
}

TEST(Config, UnknownKeysAreAllListed) {
  nlohmann::json doc = kTinyConfig;
  doc["colour"] = 1;
  doc["world"]["viewpoints"] = 10;
  doc["train"]["lr"] = "fast";
  try {
    RunConfig::from_json(doc);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("colour"), std::string::npos) << what;
    EXPECT_NE(what.find("world.viewpoints"), std::string::npos) << what;
    EXPECT_NE(what.find("train.lr"), std::string::npos) << what;
  }
}

TEST(Config, CrossFieldChecks) {
  nlohmann::json doc = kTinyConfig;
  doc["model"]["d_feat"] = 16;
  EXPECT_THROW(RunConfig::from_json(doc), ConfigError);
  doc = kTinyConfig;
  doc["train"]["weights"] = {{"eqa", 1.0}};
  EXPECT_THROW(RunConfig::from_json(doc), ConfigError);
  doc = kTinyConfig;
  doc["tasks"]["splits"]["test"] = doc["tasks"]["splits"]["train"];
  EXPECT_THROW(RunConfig::from_json(doc), ConfigError);
  doc = kTinyConfig;
  doc["seed"] = -1;
  EXPECT_THROW(RunConfig::from_json(doc), ConfigError);
  EXPECT_NO_THROW(RunConfig::from_json(kTinyConfig));
}

TEST(Cli, EndToEndAndExitCodes) {
  const fs::path dir = scratch("e2e");
  const std::string cfg = write_config(dir, kTinyConfig);
  const fs::path log = dir / "log.txt";

  ASSERT_EQ(run("gen-data --config " + cfg + " --out-dir " + (dir / "data").string(), log), 0) << slurp(log);
  for (const char* split : {"train", "val_seen", "val_unseen"}) {
    EXPECT_TRUE(fs::exists(dir / "data" / split / "worlds.json")) << split;
    EXPECT_TRUE(fs::exists(dir / "data" / split / "vln.jsonl")) << split;
  }

  // Same config, same bytes.
  ASSERT_EQ(run("gen-data --config " + cfg + " --out-dir " + (dir / "again").string(), log), 0);
  for (const auto& entry : fs::recursive_directory_iterator(dir / "data")) {
    if (!entry.is_regular_file()) continue;
    const fs::path twin = dir / "again" / fs::relative(entry.path(), dir / "data");
    EXPECT_EQ(slurp(entry.path()), slurp(twin)) << twin;
  }

  const std::string data = " --data " + (dir / "data").string();
  ASSERT_EQ(run("train --quiet --config " + cfg + data + " --out " + (dir / "run").string(), log), 0) << slurp(log);
  const fs::path ckpt = dir / "run" / "checkpoint.nvgn";
  ASSERT_TRUE(fs::exists(ckpt));
  EXPECT_TRUE(fs::exists(dir / "run" / "loss.csv"));

  const fs::path report = dir / "report.json";
  ASSERT_EQ(run("eval --checkpoint " + ckpt.string() + data + " --report " + report.string(), log), 0) << slurp(log);
  const auto doc = nlohmann::json::parse(slurp(report));
  EXPECT_EQ(doc.at("episodes").size(), 10u);
  EXPECT_TRUE(fs::exists(dir / "report.csv"));
  const fs::path rerun = dir / "rerun.json";
  ASSERT_EQ(run("eval --checkpoint " + ckpt.string() + data + " --report " + rerun.string(), log), 0);
  EXPECT_EQ(slurp(report), slurp(rerun));

  ASSERT_EQ(run("inspect --episode " + (dir / "data" / "val_seen" / "vln.jsonl").string() + " --checkpoint " +
                    ckpt.string(),
                log),
            0)
      << slurp(log);
  EXPECT_NE(slurp(log).find("# trace"), std::string::npos);

  // 2: configuration and usage errors.
  nlohmann::json bad = kTinyConfig;
  bad["world"]["num_viewpoints"] = 1;
  const fs::path bad_dir = dir / "bad";
  fs::create_directories(bad_dir);
  EXPECT_EQ(run("gen-data --config " + write_config(bad_dir, bad) + " --out-dir " + (dir / "x").string(), log), 2);
  EXPECT_EQ(run("eval --checkpoint " + ckpt.string() + data + " --tasks teleport", log), 2);
  EXPECT_EQ(run("frobnicate", log), 2);

  // 3: missing or corrupt inputs.
  EXPECT_EQ(run("eval --checkpoint " + (dir / "none.nvgn").string() + data, log), 3);
  const fs::path broken = dir / "broken.nvgn";
  {
    std::string bytes = slurp(ckpt);
    bytes.resize(bytes.size() / 2);
    std::ofstream(broken, std::ios::binary) << bytes;
  }
  EXPECT_EQ(run("eval --checkpoint " + broken.string() + data, log), 3);

  // 4: non-finite values during training.
  const fs::path nan_ckpt = dir / "nan.nvgn";
  ASSERT_EQ(run("train --quiet --config " + cfg + data + " --out " + (dir / "run").string() + " --stop-at 2", log), 0);
  Checkpoint part = load_checkpoint(ckpt.string());
  part.params.decoder.final_norm.shift(0, 0) = std::numeric_limits<double>::quiet_NaN();
  save_checkpoint(nan_ckpt.string(), part.params, part.adam, part.meta);
  EXPECT_EQ(run("train --quiet --config " + cfg + data + " --out " + (dir / "nan").string() + " --resume " +
                    nan_ckpt.string(),
                log),
            4)
      << slurp(log);
}
