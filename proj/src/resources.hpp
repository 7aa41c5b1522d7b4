#pragma once

#include <string_view>

namespace navgen::resources {

extern const std::string_view kTemplateCatalog;
extern const std::string_view kLexicon;

}  // namespace navgen::resources
