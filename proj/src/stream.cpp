#include "navgen/stream.hpp"

#include <algorithm>

namespace navgen {

std::string_view to_string(SlotTag tag) {
  switch (tag) {
    case SlotTag::View: return "VIEW";
    case SlotTag::History: return "HISTORY";
    case SlotTag::Object: return "OBJECT";
    case SlotTag::Scene: return "SCENE";
  }
  return "?";
}

std::size_t TokenStream::slot_count() const {
  return static_cast<std::size_t>(std::count_if(elements.begin(), elements.end(), [](const StreamElement& e) {
    return std::holds_alternative<SlotElement>(e);
  }));
}

void TokenStream::validate(int d_model) const {
  if (elements.empty()) throw SchemaError("empty token stream");
  for (std::size_t i = 0; i < elements.size(); ++i) {
    if (is_text(i)) continue;
    if (slot(i).vector.size() != d_model) {
      throw SchemaError("slot at position " + std::to_string(i) + " has width " +
                        std::to_string(slot(i).vector.size()) + ", expected " + std::to_string(d_model));
    }
  }
  if (!target_span) return;
  const auto [b, e] = *target_span;
  if (b >= e || e > elements.size()) throw SchemaError("target span out of bounds");
  if (b == 0) throw SchemaError("target span cannot start at position 0");
  for (std::size_t i = b; i < e; ++i) {
    if (!is_text(i)) throw SchemaError("target span covers a slot at position " + std::to_string(i));
  }
}

}  // namespace navgen
