#include "navgen/episode.hpp"

#include "navgen/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace navgen {

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::Vln: return "VLN";
    case TaskKind::ObjLoc: return "OBJLOC";
    case TaskKind::Summ: return "SUMM";
    case TaskKind::Qa: return "QA";
    case TaskKind::Eqa: return "EQA";
  }
  return "?";
}

TaskKind parse_kind(std::string_view text) {
  std::string upper(text);
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
  for (TaskKind k : kAllKinds) {
    if (to_string(k) == upper) return k;
  }
  throw ConfigError("unknown task kind: " + std::string(text));
}

void Episode::validate() const {
  auto fail = [&](const std::string& why) { throw ValidationError("episode " + episode_id + ": " + why); };
  if (max_steps <= 0) fail("max_steps must be > 0");
  const bool navigates = kind == TaskKind::Vln || kind == TaskKind::ObjLoc || kind == TaskKind::Eqa;
  if (navigates || kind == TaskKind::Summ) {
    if (!gt_path || gt_path->empty()) fail("gt_path required");
    if (gt_path->front() != start) fail("gt_path must begin at start");
    if (std::find(goal_viewpoints.begin(), goal_viewpoints.end(), gt_path->back()) == goal_viewpoints.end()) {
      fail("gt_path must end in the goal set");
    }
  }
  if (kind == TaskKind::ObjLoc) {
    if (!target_object) fail("target_object required");
    if (std::find(goal_viewpoints.begin(), goal_viewpoints.end(), target_object->viewpoint) == goal_viewpoints.end()) {
      fail("target object must sit at a goal viewpoint");
    }
  }
  if (kind == TaskKind::Summ && references.empty()) fail("references required");
  if (kind == TaskKind::Qa) {
    if (!qa_answer) fail("qa_answer required");
    if (positions.empty()) fail("observation positions required");
  }
  if (kind == TaskKind::Eqa && (!qa_answer || !question)) fail("question and qa_answer required");
}

void validate_against(const Episode& episode, const World& world) {
  episode.validate();
  auto fail = [&](const std::string& why) { throw ValidationError("episode " + episode.episode_id + ": " + why); };
  auto check = [&](int v) {
    if (v < 0 || v >= world.size()) fail("viewpoint out of range");
  };
  check(episode.start);
  for (int g : episode.goal_viewpoints) check(g);
  for (int p : episode.positions) check(p);
  if (episode.gt_path) {
    for (int v : *episode.gt_path) check(v);
    for (std::size_t i = 1; i < episode.gt_path->size(); ++i) {
      if (!world.adjacent((*episode.gt_path)[i - 1], (*episode.gt_path)[i])) fail("gt_path steps must be adjacent");
    }
  }
  if (episode.target_object) {
    const auto& vp = world.viewpoint(episode.target_object->viewpoint);
    if (episode.target_object->object_id < 1 || episode.target_object->object_id > static_cast<int>(vp.objects.size())) {
      fail("target object not present at its viewpoint");
    }
  }
}

void TaskConfig::validate() const {
  std::vector<std::string> problems;
  if (min_path_len < 1) problems.push_back("min_path_len must be >= 1");
  if (max_path_len < min_path_len) problems.push_back("max_path_len must be >= min_path_len");
  if (max_tries < 1) problems.push_back("max_tries must be >= 1");
  if (history_cap_vln < 1 || history_cap_objloc < 1 || history_cap_dialog < 1 || history_cap_eqa < 1) {
    problems.push_back("history caps must be >= 1");
  }
  if (dialog_fraction < 0.0 || dialog_fraction > 1.0) problems.push_back("dialog_fraction must lie in [0,1]");
  if (qa_num_positions < 1) problems.push_back("qa_num_positions must be >= 1");
  if (qa_count_fraction < 0.0 || qa_count_fraction > 1.0) problems.push_back("qa_count_fraction must lie in [0,1]");
  if (!problems.empty()) {
    std::string msg = "invalid task config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
}

std::vector<std::string> path_landmarks(const World& world, const std::vector<int>& path) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const int cid = world.candidate_id(path[i - 1], path[i]);
    const auto& cand = world.candidates(path[i - 1])[static_cast<std::size_t>(cid - 1)];
    const auto& slot = world.viewpoint(path[i - 1]).views[static_cast<std::size_t>(cand.slot)];
    if (!slot.landmark) throw ValidationError("navigable slot without landmark");
    out.push_back(world.landmark_vocab()[static_cast<std::size_t>(*slot.landmark)]);
  }
  return out;
}

namespace {

const std::string& grammar(const std::string& key) { return TemplateCatalog::standard().grammar.at(key); }

std::string fill1(const std::string& key, const std::string& arg) {
  const std::string args[] = {arg};
  return TemplateCatalog::fill(grammar(key), args);
}

// "go to the a then the b" without the terminal phrase.
std::string route_segment(std::span<const std::string> landmarks) {
  std::string out = fill1("route_first", landmarks.front());
  for (std::size_t i = 1; i < landmarks.size(); ++i) out += " " + fill1("route_next", landmarks[i]);
  return out;
}

std::string route_text(const std::vector<std::string>& landmarks) {
  if (landmarks.empty()) return grammar("route_empty");
  return route_segment(landmarks) + " " + grammar("route_end");
}

std::string dialog_text(const std::vector<std::string>& landmarks, Rng& rng) {
  const int k = static_cast<int>(landmarks.size());
  if (k == 0) return grammar("dialog_turn") + " " + grammar("route_empty");
  std::uniform_int_distribution<int> turns_dist(1, std::min(3, k));
  const int turns = turns_dist(rng);
  // Random contiguous split of the landmark sequence into `turns` parts.
  std::vector<int> cuts(static_cast<std::size_t>(k - 1));
  std::iota(cuts.begin(), cuts.end(), 1);
  std::shuffle(cuts.begin(), cuts.end(), rng);
  cuts.resize(static_cast<std::size_t>(turns - 1));
  std::sort(cuts.begin(), cuts.end());
  cuts.push_back(k);
  std::string out;
  int begin = 0;
  for (std::size_t t = 0; t < cuts.size(); ++t) {
    const int end = cuts[t];
    std::span<const std::string> seg(landmarks.data() + begin, static_cast<std::size_t>(end - begin));
    if (!out.empty()) out += " ";
    out += grammar("dialog_turn") + " " + route_segment(seg) + " ";
    out += (t + 1 == cuts.size()) ? grammar("route_end") : grammar("turn_end");
    begin = end;
  }
  return out;
}

int uniform_index(Rng& rng, std::size_t n) {
  std::uniform_int_distribution<int> d(0, static_cast<int>(n) - 1);
  return d(rng);
}

// Draws (start, goal) pairs until the shortest path satisfies the length and
// distance limits plus the caller's goal predicate.
template <class GoalOk>
std::vector<int> draw_path(const World& world, Rng& rng, const TaskConfig& cfg, int min_len, GoalOk&& goal_ok) {
  std::uniform_int_distribution<int> pick(0, world.size() - 1);
  for (int attempt = 0; attempt < cfg.max_tries; ++attempt) {
    const int start = pick(rng);
    const int goal = pick(rng);
    if (!goal_ok(goal)) continue;
    const double dist = world.geodesic(start, goal);
    if (start != goal && dist < cfg.min_goal_distance) continue;
    auto path = world.shortest_path(start, goal);
    const int len = static_cast<int>(path.size());
    if (len < min_len || len > cfg.max_path_len) continue;
    return path;
  }
  throw GenerationExhausted("no qualifying start/goal pair after " + std::to_string(cfg.max_tries) + " draws");
}

std::vector<std::string> viewpoint_landmarks(const World& world, int v) {
  std::vector<std::string> out;
  for (const auto& slot : world.viewpoint(v).views) {
    if (slot.landmark) out.push_back(world.landmark_vocab()[static_cast<std::size_t>(*slot.landmark)]);
  }
  return out;
}

Episode nav_episode(TaskKind kind, const std::vector<int>& path) {
  Episode ep;
  ep.kind = kind;
  ep.start = path.front();
  ep.goal_viewpoints = {path.back()};
  ep.gt_path = path;
  return ep;
}

}  // namespace

std::string route_instruction(const World& world, const std::vector<int>& path) {
  return route_text(path_landmarks(world, path));
}

Episode synth_vln(const World& world, Rng& rng, const TaskConfig& cfg) {
  cfg.validate();
  if (cfg.min_path_len < 2) throw ConfigError("VLN requires min_path_len >= 2");
  auto path = draw_path(world, rng, cfg, cfg.min_path_len, [](int) { return true; });
  Episode ep = nav_episode(TaskKind::Vln, path);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ep.dialog = unit(rng) < cfg.dialog_fraction;
  const auto landmarks = path_landmarks(world, path);
  ep.instruction = ep.dialog ? dialog_text(landmarks, rng) : route_text(landmarks);
  ep.max_steps = ep.dialog ? cfg.history_cap_dialog : cfg.history_cap_vln;
  return ep;
}

Episode synth_objloc(const World& world, Rng& rng, const TaskConfig& cfg) {
  cfg.validate();
  if (cfg.min_path_len < 2) throw ConfigError("OBJLOC requires min_path_len >= 2");
  auto path = draw_path(world, rng, cfg, cfg.min_path_len,
                        [&](int goal) { return !world.viewpoint(goal).objects.empty(); });
  Episode ep = nav_episode(TaskKind::ObjLoc, path);
  const auto& goal = world.viewpoint(path.back());
  const auto& target = goal.objects[static_cast<std::size_t>(uniform_index(rng, goal.objects.size()))];
  const auto nearby = viewpoint_landmarks(world, goal.id);
  const std::string near = nearby[static_cast<std::size_t>(uniform_index(rng, nearby.size()))];
  const std::string args[] = {world.object_vocab()[static_cast<std::size_t>(target.category)], near};
  ep.instruction = route_instruction(world, path) + " " + TemplateCatalog::fill(grammar("target"), args);
  ep.target_object = TargetObject{goal.id, target.id};
  ep.max_steps = cfg.history_cap_objloc;
  return ep;
}

Episode synth_summ(const World& world, Rng& rng, const TaskConfig& cfg) {
  cfg.validate();
  if (cfg.min_path_len < 2) throw ConfigError("SUMM requires min_path_len >= 2");
  auto path = draw_path(world, rng, cfg, cfg.min_path_len, [](int) { return true; });
  Episode ep = nav_episode(TaskKind::Summ, path);
  ep.references = {route_instruction(world, path)};
  ep.max_steps = cfg.history_cap_vln;
  return ep;
}

Episode synth_qa(const World& world, Rng& rng, const TaskConfig& cfg) {
  cfg.validate();
  if (cfg.qa_num_positions > world.size()) throw ConfigError("qa_num_positions exceeds world size");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<int> all(static_cast<std::size_t>(world.size()));
  std::iota(all.begin(), all.end(), 0);
  for (int attempt = 0; attempt < cfg.max_tries; ++attempt) {
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<int> positions(all.begin(), all.begin() + cfg.qa_num_positions);
    const bool count_question = unit(rng) < cfg.qa_count_fraction;
    const int focus = positions[static_cast<std::size_t>(uniform_index(rng, positions.size()))];
    const auto& vp = world.viewpoint(focus);
    if (count_question ? vp.objects.size() > 9 : vp.objects.size() != 1) continue;
    const auto landmarks = viewpoint_landmarks(world, focus);
    if (landmarks.empty()) continue;
    const std::string landmark = landmarks[static_cast<std::size_t>(uniform_index(rng, landmarks.size()))];
    const std::string question = fill1(count_question ? "qa_count" : "qa_what", landmark);
    // Ambiguous referents are resampled.
    auto answer = answer_from_world(world, question, positions);
    if (!answer) continue;
    Episode ep;
    ep.kind = TaskKind::Qa;
    ep.instruction = question;
    ep.start = positions.front();
    ep.positions = positions;
    ep.qa_answer = *answer;
    ep.max_steps = 1;
    return ep;
  }
  throw GenerationExhausted("no unambiguous question after " + std::to_string(cfg.max_tries) + " draws");
}

Episode synth_eqa(const World& world, Rng& rng, const TaskConfig& cfg) {
  cfg.validate();
  auto path = draw_path(world, rng, cfg, cfg.min_path_len,
                        [&](int goal) { return world.viewpoint(goal).objects.size() == 1; });
  Episode ep = nav_episode(TaskKind::Eqa, path);
  const auto landmarks = viewpoint_landmarks(world, path.back());
  const std::string landmark = landmarks[static_cast<std::size_t>(uniform_index(rng, landmarks.size()))];
  ep.instruction = route_instruction(world, path);
  ep.question = fill1("qa_what", landmark);
  ep.qa_answer = world.object_vocab()[static_cast<std::size_t>(world.viewpoint(path.back()).objects.front().category)];
  ep.max_steps = cfg.history_cap_eqa;
  return ep;
}

Episode synth_episode(TaskKind kind, const World& world, Rng& rng, const TaskConfig& cfg) {
  switch (kind) {
    case TaskKind::Vln: return synth_vln(world, rng, cfg);
    case TaskKind::ObjLoc: return synth_objloc(world, rng, cfg);
    case TaskKind::Summ: return synth_summ(world, rng, cfg);
    case TaskKind::Qa: return synth_qa(world, rng, cfg);
    case TaskKind::Eqa: return synth_eqa(world, rng, cfg);
  }
  throw ConfigError("unknown task kind");
}

std::optional<std::string> answer_from_world(const World& world, std::string_view question,
                                             const std::vector<int>& positions) {
  const auto words = split_words(question);
  bool count_question = false;
  std::optional<std::string> landmark;
  for (const char* key : {"qa_what", "qa_count"}) {
    const auto pattern = split_words(grammar(key));
    if (pattern.size() != words.size()) continue;
    std::optional<std::string> slot;
    bool ok = true;
    for (std::size_t i = 0; i < words.size() && ok; ++i) {
      if (pattern[i] == "{}") {
        slot = words[i];
      } else {
        ok = pattern[i] == words[i];
      }
    }
    if (ok && slot) {
      landmark = slot;
      count_question = std::string_view(key) == "qa_count";
      break;
    }
  }
  if (!landmark) return std::nullopt;
  std::optional<int> focus;
  for (int p : positions) {
    const auto lms = viewpoint_landmarks(world, p);
    if (std::find(lms.begin(), lms.end(), *landmark) == lms.end()) continue;
    if (focus && *focus != p) return std::nullopt;
    focus = p;
  }
  if (!focus) return std::nullopt;
  const auto& objects = world.viewpoint(*focus).objects;
  if (count_question) {
    if (objects.size() > 9) return std::nullopt;
    return std::to_string(objects.size());
  }
  if (objects.size() != 1) return std::nullopt;
  return world.object_vocab()[static_cast<std::size_t>(objects.front().category)];
}

// ---------------------------------------------------------------------------
// JSONL
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint32_t kEpisodeVersion = 1;
const std::set<std::string> kEpisodeFields = {
    "episode_id", "kind",       "world",     "instruction", "question",  "start",     "goal_viewpoints",
    "target_object", "gt_path", "references", "qa_answer",  "positions", "max_steps", "dialog"};

template <class J>
J optional_json(const std::optional<std::string>& v) {
  return v ? J(*v) : J(nullptr);
}

}  // namespace

nlohmann::ordered_json episode_to_json(const Episode& ep) {
  nlohmann::ordered_json j;
  j["episode_id"] = ep.episode_id;
  j["kind"] = to_string(ep.kind);
  j["world"] = ep.world;
  j["instruction"] = ep.instruction;
  j["question"] = optional_json<nlohmann::ordered_json>(ep.question);
  j["start"] = ep.start;
  j["goal_viewpoints"] = ep.goal_viewpoints;
  j["target_object"] = ep.target_object
                           ? nlohmann::ordered_json{{"viewpoint", ep.target_object->viewpoint},
                                                    {"object_id", ep.target_object->object_id}}
                           : nlohmann::ordered_json(nullptr);
  j["gt_path"] = ep.gt_path ? nlohmann::ordered_json(*ep.gt_path) : nlohmann::ordered_json(nullptr);
  j["references"] = ep.references;
  j["qa_answer"] = optional_json<nlohmann::ordered_json>(ep.qa_answer);
  j["positions"] = ep.positions;
  j["max_steps"] = ep.max_steps;
  j["dialog"] = ep.dialog;
  return j;
}

Episode episode_from_json(const nlohmann::json& j, bool strict) {
  if (!j.is_object()) throw FormatError("episode record must be a JSON object");
  if (strict) {
    for (const auto& [key, value] : j.items()) {
      if (!kEpisodeFields.contains(key)) throw FormatError("unknown episode field: " + key);
    }
  }
  try {
    Episode ep;
    ep.episode_id = j.at("episode_id").get<std::string>();
    ep.kind = parse_kind(j.at("kind").get<std::string>());
    ep.world = j.at("world").get<int>();
    ep.instruction = j.at("instruction").get<std::string>();
    if (!j.at("question").is_null()) ep.question = j.at("question").get<std::string>();
    ep.start = j.at("start").get<int>();
    ep.goal_viewpoints = j.at("goal_viewpoints").get<std::vector<int>>();
    if (!j.at("target_object").is_null()) {
      ep.target_object =
          TargetObject{j.at("target_object").at("viewpoint").get<int>(), j.at("target_object").at("object_id").get<int>()};
    }
    if (!j.at("gt_path").is_null()) ep.gt_path = j.at("gt_path").get<std::vector<int>>();
    ep.references = j.at("references").get<std::vector<std::string>>();
    if (!j.at("qa_answer").is_null()) ep.qa_answer = j.at("qa_answer").get<std::string>();
    ep.positions = j.at("positions").get<std::vector<int>>();
    ep.max_steps = j.at("max_steps").get<int>();
    ep.dialog = j.at("dialog").get<bool>();
    ep.validate();
    return ep;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed episode: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  } catch (const ValidationError& e) {
    throw FormatError(e.what());
  }
}

void write_jsonl(const std::string& path, const std::vector<Episode>& episodes, const std::string& world_ref) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write episode file: " + path);
  nlohmann::ordered_json header;
  header["format"] = "navgen-episodes";
  header["version"] = kEpisodeVersion;
  header["world_ref"] = world_ref;
  out << header.dump() << '\n';
  for (const auto& ep : episodes) out << episode_to_json(ep).dump() << '\n';
  if (!out) throw IoError("failed writing episode file: " + path);
}

EpisodeFile read_jsonl(const std::string& path, bool strict) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read episode file: " + path);
  EpisodeFile file;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    if (!have_header) {
      try {
        if (doc.at("format").get<std::string>() != "navgen-episodes") {
          throw ParseError("not a navgen-episodes file", line_no);
        }
        const auto version = doc.at("version").get<std::uint32_t>();
        if (version != kEpisodeVersion) throw VersionError(kEpisodeVersion, version);
        file.world_ref = doc.at("world_ref").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed header: ") + e.what(), line_no);
      }
      have_header = true;
      continue;
    }
    try {
      file.episodes.push_back(episode_from_json(doc, strict));
    } catch (const FormatError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  if (!have_header) throw ParseError("missing header record", line_no == 0 ? 1 : line_no);
  return file;
}

}  // namespace navgen
