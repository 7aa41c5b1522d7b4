#include "navgen/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace navgen {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Field lists, shared by the reader and the writer.
template <class V>
void bind(V& v, WorldConfig& c) {
  v("num_viewpoints", c.num_viewpoints);
  v("n_views", c.n_views);
  v("d_feat", c.d_feat);
  v("feature_noise", c.feature_noise);
  v("k_nearest", c.k_nearest);
  v("max_degree", c.max_degree);
  v("box", c.box);
  v("min_objects", c.min_objects);
  v("max_objects", c.max_objects);
  v("extra_landmarks", c.extra_landmarks);
}

template <class V>
void bind(V& v, TaskConfig& c) {
  v("min_path_len", c.min_path_len);
  v("max_path_len", c.max_path_len);
  v("min_goal_distance", c.min_goal_distance);
  v("max_tries", c.max_tries);
  v("history_cap_vln", c.history_cap_vln);
  v("history_cap_objloc", c.history_cap_objloc);
  v("history_cap_dialog", c.history_cap_dialog);
  v("history_cap_eqa", c.history_cap_eqa);
  v("dialog_fraction", c.dialog_fraction);
  v("qa_num_positions", c.qa_num_positions);
  v("qa_count_fraction", c.qa_count_fraction);
}

template <class V>
void bind(V& v, ModelConfig& c) {
  v("vocab_size", c.vocab_size);
  v("d_model", c.d_model);
  v("n_layers", c.n_layers);
  v("n_heads", c.n_heads);
  v("ff_mult", c.ff_mult);
  v("max_len", c.max_len);
  v("tie_embeddings", c.tie_embeddings);
  v("shared_id_embeddings", c.shared_id_embeddings);
  v("fuse_layers", c.fuse_layers);
  v("fuse_heads", c.fuse_heads);
  v("d_feat", c.d_feat);
  v("angle_freqs", c.angle_freqs);
  v("init_std", c.init_std);
}

template <class V>
void bind(V& v, TrainConfig& c) {
  v("pretrain_steps", c.pretrain_steps);
  v("finetune_steps", c.finetune_steps);
  v("batch_size", c.batch_size);
  v("lr", c.lr);
  v("beta1", c.beta1);
  v("beta2", c.beta2);
  v("eps", c.eps);
  v("clip_norm", c.clip_norm);
  v("weights", c.weights);
  v("alternation_period", c.alternation_period);
  v("student_temperature", c.student_temperature);
}

template <class V>
void bind(V& v, EvalConfig& c) {
  v("threshold", c.threshold);
  v("explore_temperature", c.explore_temperature);
  v("exploration_kinds", c.exploration_kinds);
  v("answer_max_tokens", c.answer_max_tokens);
  v("summary_max_tokens", c.summary_max_tokens);
}

template <class V>
void bind(V& v, SplitSpec& c) {
  v("world_set", c.world_set);
  v("worlds", c.worlds);
  v("episodes", c.episodes);
}

std::string kind_key(TaskKind k) {
  std::string s(to_string(k));
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

ordered_json encode(int x) { return x; }
ordered_json encode(double x) { return x; }
ordered_json encode(bool x) { return x; }
ordered_json encode(const std::string& x) { return x; }
ordered_json encode(const Vector3& x) { return ordered_json::array({x.x(), x.y(), x.z()}); }
template <class T>
ordered_json encode(const std::map<TaskKind, T>& m) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : m) j[kind_key(k)] = v;
  return j;
}
ordered_json encode(const std::vector<TaskKind>& kinds) {
  ordered_json j = ordered_json::array();
  for (TaskKind k : kinds) j.push_back(kind_key(k));
  return j;
}

struct Writer {
  ordered_json& out;
  template <class T>
  void operator()(const char* key, T& value) {
    out[key] = encode(value);
  }
};

template <class T>
ordered_json write(T value) {
  ordered_json j = ordered_json::object();
  Writer w{j};
  bind(w, value);
  return j;
}

void decode(const json& j, int& x) {
  if (!j.is_number_integer()) throw std::invalid_argument("expected an integer");
  x = j.get<int>();
}
void decode(const json& j, double& x) {
  if (!j.is_number()) throw std::invalid_argument("expected a number");
  x = j.get<double>();
}
void decode(const json& j, bool& x) {
  if (!j.is_boolean()) throw std::invalid_argument("expected a boolean");
  x = j.get<bool>();
}
void decode(const json& j, std::string& x) {
  if (!j.is_string()) throw std::invalid_argument("expected a string");
  x = j.get<std::string>();
}
void decode(const json& j, Vector3& x) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected an array of 3 numbers");
  for (int i = 0; i < 3; ++i) decode(j[static_cast<std::size_t>(i)], x[i]);
}
TaskKind decode_kind(const std::string& s) {
  try {
    return parse_kind(s);
  } catch (const Error&) {
    throw std::invalid_argument("unknown task kind '" + s + "'");
  }
}
template <class T>
void decode(const json& j, std::map<TaskKind, T>& m) {
  if (!j.is_object()) throw std::invalid_argument("expected an object keyed by task kind");
  m.clear();
  for (const auto& [k, v] : j.items()) decode(v, m[decode_kind(k)]);
}
void decode(const json& j, std::vector<TaskKind>& kinds) {
  if (!j.is_array()) throw std::invalid_argument("expected an array of task kinds");
  kinds.clear();
  for (const auto& v : j) {
    std::string s;
    decode(v, s);
    kinds.push_back(decode_kind(s));
  }
}

// Reads known keys, records type errors and unknown keys with full paths.
struct Reader {
  const json& in;
  std::string prefix;
  std::vector<std::string>& problems;
  std::set<std::string> seen;

  template <class T>
  void operator()(const char* key, T& value) {
    seen.insert(key);
    if (!in.contains(key)) return;
    try {
      decode(in.at(key), value);
    } catch (const std::exception& e) {
      problems.push_back(prefix + key + ": " + e.what());
    }
  }

  void finish() {
    for (const auto& [k, v] : in.items()) {
      if (!seen.contains(k)) problems.push_back(prefix + k + ": unknown key");
    }
  }
};

template <class T>
void read_section(const json& doc, const char* name, T& value, std::vector<std::string>& problems,
                  const std::string& parent = "") {
  if (!doc.contains(name)) return;
  const json& j = doc.at(name);
  const std::string prefix = parent + name + ".";
  if (!j.is_object()) {
    problems.push_back(parent + name + ": expected an object");
    return;
  }
  Reader r{j, prefix, problems, {}};
  bind(r, value);
  r.finish();
}

template <class F>
void collect(std::vector<std::string>& problems, F&& check) {
  try {
    check();
  } catch (const ConfigError& e) {
    std::istringstream lines(e.what());
    bool bullets = false;
    for (std::string line; std::getline(lines, line);) {
      if (line.rfind("  - ", 0) == 0) {
        problems.push_back(line.substr(4));
        bullets = true;
      }
    }
    if (!bullets) problems.push_back(e.what());
  }
}

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.splits["train"] = SplitSpec{"", 3,
                                {{TaskKind::Vln, 2000}, {TaskKind::ObjLoc, 1000}, {TaskKind::Summ, 500},
                                 {TaskKind::Qa, 1500}, {TaskKind::Eqa, 0}}};
  const std::map<TaskKind, int> eval_counts{{TaskKind::Vln, 100}, {TaskKind::ObjLoc, 100}, {TaskKind::Summ, 100},
                                            {TaskKind::Qa, 100}, {TaskKind::Eqa, 100}};
  c.splits["val_seen"] = SplitSpec{"train", 0, eval_counts};
  c.splits["val_unseen"] = SplitSpec{"", 3, eval_counts};
  return c;
}

RunConfig RunConfig::from_json(const json& doc) {
  std::vector<std::string> problems;
  RunConfig c = defaults();
  if (!doc.is_object()) throw ConfigError("config document must be an object");
  static const std::set<std::string> kTop{"seed", "world", "tasks", "model", "train", "eval"};
  for (const auto& [k, v] : doc.items()) {
    if (!kTop.contains(k)) problems.push_back(k + ": unknown key");
  }
  if (doc.contains("seed")) {
    if (doc["seed"].is_number_unsigned() || (doc["seed"].is_number_integer() && doc["seed"].get<long long>() >= 0)) {
      c.seed = doc["seed"].get<std::uint64_t>();
    } else {
      problems.push_back("seed: expected a non-negative integer");
    }
  }
  read_section(doc, "world", c.world, problems);
  read_section(doc, "model", c.model, problems);
  read_section(doc, "train", c.train, problems);
  read_section(doc, "eval", c.eval, problems);
  if (doc.contains("tasks")) {
    json tasks = doc.at("tasks");
    if (tasks.is_object() && tasks.contains("splits")) {
      const json splits = tasks.at("splits");
      tasks.erase("splits");
      if (!splits.is_object()) {
        problems.push_back("tasks.splits: expected an object");
      } else {
        for (const auto& [name, spec] : splits.items()) {
          if (std::find(kSplitNames.begin(), kSplitNames.end(), name) == kSplitNames.end()) {
            problems.push_back("tasks.splits." + name + ": unknown split");
            continue;
          }
          read_section(splits, name.c_str(), c.splits[name], problems, "tasks.splits.");
        }
      }
    }
    read_section(json{{"tasks", tasks}}, "tasks", c.tasks, problems);
  }

  collect(problems, [&] { c.world.validate(); });
  collect(problems, [&] { c.tasks.validate(); });
  collect(problems, [&] { c.model.validate(); });
  collect(problems, [&] { c.train.validate(); });
  if (c.model.d_feat != c.world.d_feat) problems.push_back("model.d_feat must equal world.d_feat");
  if (!(c.eval.threshold >= 0.0)) problems.push_back("eval.threshold must be >= 0");
  if (!(c.eval.explore_temperature > 0.0)) problems.push_back("eval.explore_temperature must be > 0");
  if (c.eval.answer_max_tokens < 1) problems.push_back("eval.answer_max_tokens must be >= 1");
  if (c.eval.summary_max_tokens < 1) problems.push_back("eval.summary_max_tokens must be >= 1");
  if (auto it = c.train.weights.find(TaskKind::Eqa); it != c.train.weights.end() && it->second > 0.0) {
    problems.push_back("train.weights.eqa: EQA is evaluated by composition and cannot be trained");
  }
  for (const auto& [name, spec] : c.splits) {
    const std::string p = "tasks.splits." + name;
    if (!spec.world_set.empty()) {
      if (spec.world_set == name || !c.splits.contains(spec.world_set) || !c.splits.at(spec.world_set).world_set.empty()) {
        problems.push_back(p + ".world_set: must name another split that owns its worlds");
      }
    } else if (spec.worlds < 1) {
      problems.push_back(p + ".worlds must be >= 1");
    }
    for (const auto& [kind, n] : spec.episodes) {
      if (n < 0) problems.push_back(p + ".episodes." + kind_key(kind) + " must be >= 0");
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return from_json(doc);
}

ordered_json RunConfig::to_json() const {
  ordered_json j;
  j["seed"] = seed;
  j["world"] = write(world);
  ordered_json tj = write(tasks);
  ordered_json splits_json = ordered_json::object();
  for (const auto& name : kSplitNames) {
    if (splits.contains(name)) splits_json[name] = write(splits.at(name));
  }
  tj["splits"] = splits_json;
  j["tasks"] = tj;
  j["model"] = write(model);
  j["train"] = write(train);
  j["eval"] = write(eval);
  return j;
}

std::uint64_t RunConfig::world_seed(const std::string& split, int index) const {
  return derive_seed(derive_seed(seed, "world/" + split), static_cast<std::uint64_t>(index));
}

std::uint64_t RunConfig::episode_seed(const std::string& split, TaskKind kind, int index) const {
  return derive_seed(derive_seed(seed, "data/" + split + "/" + kind_key(kind)), static_cast<std::uint64_t>(index));
}

std::uint64_t RunConfig::train_seed() const { return derive_seed(seed, "train"); }
std::uint64_t RunConfig::eval_seed() const { return derive_seed(seed, "eval"); }
std::uint64_t RunConfig::init_seed() const { return derive_seed(seed, "init"); }

ordered_json model_config_to_json(const ModelConfig& c) { return write(c); }

ModelConfig model_config_from_json(const json& doc) {
  std::vector<std::string> problems;
  ModelConfig c;
  read_section(json{{"model", doc}}, "model", c, problems);
  collect(problems, [&] { c.validate(); });
  if (!problems.empty()) {
    std::string msg = "invalid model config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
  return c;
}

}  // namespace navgen
