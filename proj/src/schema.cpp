#include "navgen/schema.hpp"

#include <sstream>

namespace navgen {

namespace {

void append_text(TokenStream& s, const std::string& text) {
  for (int t : Vocabulary::standard().tokenize(text)) s.elements.emplace_back(TextElement{t});
}

void append_entry(TokenStream& s, int id, const SlotElement& slot) {
  for (int t : render_id_marker(id)) s.elements.emplace_back(TextElement{t});
  s.elements.emplace_back(slot);
}

bool uses_history(TaskKind kind) { return kind != TaskKind::Qa; }

ObservationKind expected_observation(const PromptParts& p) {
  switch (p.kind) {
    case TaskKind::Vln: return ObservationKind::Candidate;
    case TaskKind::ObjLoc:
      return p.observation_kind == ObservationKind::Object ? ObservationKind::Object : ObservationKind::Candidate;
    case TaskKind::Summ: return ObservationKind::None;
    case TaskKind::Qa: return ObservationKind::Scene;
    case TaskKind::Eqa: break;
  }
  throw SchemaError("EQA prompts are assembled as separate navigation and question stages");
}

void check_contiguous(const std::vector<ObservationEntry>& obs, SlotTag tag) {
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (obs[i].id != static_cast<int>(i)) throw SchemaError("observation ids must be contiguous from 0");
    if (obs[i].slot.tag != tag) throw SchemaError("observation slot has tag " + std::string(to_string(obs[i].slot.tag)));
  }
  if (obs.empty()) throw SchemaError("observation must contain option (0)");
}

void check_scene(const std::vector<ObservationEntry>& obs) {
  int next_scene = 1;
  int next_object = 1;
  for (const auto& e : obs) {
    if (e.slot.tag == SlotTag::Scene) {
      if (e.id != next_scene++) throw SchemaError("scene ids must be contiguous from 1");
      next_object = 1;
    } else if (e.slot.tag == SlotTag::Object) {
      if (next_scene == 1) throw SchemaError("object entry before any scene position");
      if (e.id != next_object++) throw SchemaError("object ids must be contiguous from 1 within a position");
    } else {
      throw SchemaError("scene observation holds a " + std::string(to_string(e.slot.tag)) + " slot");
    }
  }
  if (next_scene == 1) throw SchemaError("scene observation needs at least one position");
}

void check_parts(const PromptParts& p) {
  const ObservationKind want = expected_observation(p);
  if (p.observation_kind != want) throw SchemaError("observation kind does not match task kind");
  if (p.history_cap < 0) throw SchemaError("negative history cap");
  if (!uses_history(p.kind) && !p.history.empty()) {
    throw SchemaError(std::string(to_string(p.kind)) + " prompts take no history");
  }
  if (static_cast<int>(p.history.size()) > p.history_cap) {
    throw SchemaError("history of " + std::to_string(p.history.size()) + " exceeds cap " +
                      std::to_string(p.history_cap));
  }
  for (const auto& h : p.history) {
    if (h.tag != SlotTag::History) throw SchemaError("history slot must carry the HISTORY tag");
  }
  switch (want) {
    case ObservationKind::None:
      if (!p.observation.empty()) throw SchemaError("summarization prompts take no observation");
      break;
    case ObservationKind::Candidate: check_contiguous(p.observation, SlotTag::View); break;
    case ObservationKind::Object: check_contiguous(p.observation, SlotTag::Object); break;
    case ObservationKind::Scene: check_scene(p.observation); break;
  }
}

const std::string& observation_header(ObservationKind k) {
  const auto& obs = TemplateCatalog::standard().observation;
  switch (k) {
    case ObservationKind::Candidate: return obs.at("candidate");
    case ObservationKind::Object: return obs.at("object");
    case ObservationKind::Scene: return obs.at("scene");
    case ObservationKind::None: break;
  }
  throw SchemaError("no observation header");
}

}  // namespace

std::vector<int> render_id_marker(int i) { return {Vocabulary::standard().marker(i)}; }

TokenStream assemble(const PromptParts& parts, const std::vector<int>& target) {
  check_parts(parts);
  const auto& vocab = Vocabulary::standard();
  TokenStream s;
  s.elements.emplace_back(TextElement{vocab.bos()});
  append_text(s, parts.task_text);
  if (uses_history(parts.kind)) {
    append_text(s, TemplateCatalog::standard().history);
    for (std::size_t i = 0; i < parts.history.size(); ++i) append_entry(s, static_cast<int>(i) + 1, parts.history[i]);
  }
  if (parts.observation_kind != ObservationKind::None) {
    append_text(s, observation_header(parts.observation_kind));
    for (const auto& e : parts.observation) append_entry(s, e.id, e.slot);
  }
  append_text(s, parts.output_hint);
  if (!target.empty()) {
    const std::size_t begin = s.size();
    for (int t : target) {
      vocab.word(t);  // range check
      s.elements.emplace_back(TextElement{t});
    }
    s.target_span = TargetSpan{begin, s.size()};
  }
  return s;
}

std::vector<int> target_for(TaskKind kind, const Supervision& supervision) {
  const auto& vocab = Vocabulary::standard();
  std::vector<int> out;
  switch (kind) {
    case TaskKind::Vln:
    case TaskKind::ObjLoc:
    case TaskKind::Eqa:
      if (!std::holds_alternative<int>(supervision)) throw SchemaError("navigation targets are IDs");
      out = render_id_marker(std::get<int>(supervision));
      break;
    case TaskKind::Summ:
    case TaskKind::Qa:
      if (!std::holds_alternative<std::string>(supervision)) throw SchemaError("text targets are strings");
      out = vocab.tokenize(std::get<std::string>(supervision));
      if (out.empty()) throw SchemaError("empty text target");
      break;
  }
  out.push_back(vocab.eos());
  return out;
}

std::string task_text(TaskKind kind, const std::string& instruction, bool dialog, bool grounding) {
  const auto& task = TemplateCatalog::standard().task;
  switch (kind) {
    case TaskKind::Vln:
    case TaskKind::Eqa: return task.at(dialog ? "vln_dialog" : "vln") + " " + instruction;
    case TaskKind::ObjLoc: return task.at(grounding ? "objloc_ground" : "objloc") + " " + instruction;
    case TaskKind::Summ: return task.at("summ");
    case TaskKind::Qa: return task.at("qa") + " " + instruction;
  }
  throw SchemaError("unknown task kind");
}

std::string output_hint(TaskKind kind, bool grounding) {
  const auto& hint = TemplateCatalog::standard().hint;
  switch (kind) {
    case TaskKind::Vln:
    case TaskKind::Eqa: return hint.at("navigate");
    case TaskKind::ObjLoc: return hint.at(grounding ? "ground" : "navigate");
    case TaskKind::Summ: return hint.at("summ");
    case TaskKind::Qa: return hint.at("qa");
  }
  throw SchemaError("unknown task kind");
}

std::vector<ObservationEntry> scene_observation(const std::vector<ScenePosition>& positions) {
  std::vector<ObservationEntry> out;
  for (std::size_t k = 0; k < positions.size(); ++k) {
    SlotElement scene = positions[k].scene;
    scene.tag = SlotTag::Scene;
    out.push_back(ObservationEntry{static_cast<int>(k) + 1, std::move(scene)});
    for (const auto& o : positions[k].objects) out.push_back(o);
  }
  return out;
}

std::string dump_stream(const TokenStream& stream) {
  const auto& vocab = Vocabulary::standard();
  std::ostringstream out;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    if (stream.is_text(i)) {
      out << "T:" << vocab.word(stream.token(i)) << '\n';
    } else {
      const auto& s = stream.slot(i);
      const std::string_view bytes(reinterpret_cast<const char*>(s.vector.data()),
                                   static_cast<std::size_t>(s.vector.size()) * sizeof(double));
      out << "S:" << to_string(s.tag) << ':' << sha256_hex(bytes) << '\n';
    }
  }
  if (stream.target_span) out << "# target " << stream.target_span->begin << ' ' << stream.target_span->end << '\n';
  return out.str();
}

}  // namespace navgen
