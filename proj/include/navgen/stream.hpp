#pragma once

#include "navgen/common.hpp"

#include <cstddef>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

namespace navgen {

class World;

enum class SlotTag { View, History, Object, Scene };

std::string_view to_string(SlotTag tag);

// Where a slot vector came from, so gradients can flow back into the scene
// encoder. External vectors are treated as constants.
struct SlotSource {
  enum class Kind { External, ViewSlot, Stop, NotExist, Object, Scene };
  Kind kind = Kind::External;
  const World* world = nullptr;
  int viewpoint = -1;
  int index = -1;  // view slot or 0-based object index
};

struct TextElement {
  int token = 0;
};

struct SlotElement {
  SlotTag tag = SlotTag::View;
  RowVector vector;
  SlotSource source;
};

using StreamElement = std::variant<TextElement, SlotElement>;

struct TargetSpan {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
};

// Mixed sequence of vocabulary tokens and continuous embedding slots; the
// universal model input.
struct TokenStream {
  std::vector<StreamElement> elements;
  std::optional<TargetSpan> target_span;

  std::size_t size() const { return elements.size(); }
  bool is_text(std::size_t i) const { return std::holds_alternative<TextElement>(elements[i]); }
  int token(std::size_t i) const { return std::get<TextElement>(elements[i]).token; }
  const SlotElement& slot(std::size_t i) const { return std::get<SlotElement>(elements[i]); }
  std::size_t slot_count() const;

  // Throws SchemaError on an empty stream, an out-of-range span, a span
  // covering a slot, or a slot of the wrong width.
  void validate(int d_model) const;
};

// One numbered observation: the ID rendered before it and its vector.
struct ObservationEntry {
  int id = 0;
  SlotElement slot;
};

}  // namespace navgen
