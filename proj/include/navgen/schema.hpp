#pragma once

#include "navgen/episode.hpp"
#include "navgen/stream.hpp"
#include "navgen/vocab.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace navgen {

// Which observation block a prompt carries.
enum class ObservationKind {
  None,       // trajectory summarization
  Candidate,  // navigation: (0) stop, (1..deg) reachable viewpoints
  Object,     // grounding: (0) not exist, (1..k) visible objects
  Scene,      // scene questions: per position (k) scene, then its objects
};

// The four schemas of one prompt. `kind` must be one of the trainable
// families (EQA is assembled as its navigation and question stages).
struct PromptParts {
  TaskKind kind = TaskKind::Vln;
  ObservationKind observation_kind = ObservationKind::Candidate;
  std::string task_text;
  std::vector<SlotElement> history;
  std::vector<ObservationEntry> observation;
  std::string output_hint;
  int history_cap = 15;
};

// The single vocabulary token of "(i)".
std::vector<int> render_id_marker(int i);

// Builds [BOS] task [history] [observation] hint [target]. A non-empty
// target is appended and marked as the supervised span. Throws SchemaError
// when parts violate the rules of their kind.
TokenStream assemble(const PromptParts& parts, const std::vector<int>& target = {});

// What a target encodes: a chosen ID or a reference text.
using Supervision = std::variant<int, std::string>;

// IDs become "(i)" + EOS, text becomes its tokens + EOS.
std::vector<int> target_for(TaskKind kind, const Supervision& supervision);

// Prompt texts for each kind.
std::string task_text(TaskKind kind, const std::string& instruction, bool dialog = false, bool grounding = false);
std::string output_hint(TaskKind kind, bool grounding = false);

// QA observation: position k (1-based) as a Scene slot, then its objects as
// (1..n) Object slots.
struct ScenePosition {
  SlotElement scene;
  std::vector<ObservationEntry> objects;  // ids 1..n, not-exist excluded
};
std::vector<ObservationEntry> scene_observation(const std::vector<ScenePosition>& positions);

// One element per line: "T:<word>" or "S:<tag>:<sha256 of vector bytes>",
// followed by "# target <begin> <end>" when a span is present.
std::string dump_stream(const TokenStream& stream);

}  // namespace navgen
