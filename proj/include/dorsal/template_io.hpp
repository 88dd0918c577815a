#pragma once

#include "dorsal/hand_model.hpp"

#include <filesystem>
#include <string_view>

namespace dorsal {

inline constexpr std::string_view kTemplateSchema = "dorsal.template/1";

/// Reads a rigged hand template document (JSON, schema "dorsal.template/1").
/// Throws ParseError on malformed input and InvariantError when the decoded
/// template breaks an invariant.
RiggedHandTemplate load_template(const std::filesystem::path& path);
RiggedHandTemplate parse_template(std::string_view text);

std::string serialize_template(const RiggedHandTemplate& tmpl);
void save_template(const RiggedHandTemplate& tmpl, const std::filesystem::path& path);

}  // namespace dorsal
