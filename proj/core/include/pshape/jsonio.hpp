#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "pshape/error.hpp"

namespace pshape {

// Insertion-ordered JSON everywhere: dumps are byte-stable for a fixed
// construction order, which the determinism guarantees rely on.
using Json = nlohmann::ordered_json;

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

const Json& require_field(const Json& j, const std::string& key, const std::string& where);

// Rejects keys outside `allowed`; `where` names the config block in errors.
void reject_unknown_keys(const Json& j, const std::vector<std::string>& allowed,
                         const std::string& where);

template <typename T>
T field_or(const Json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

}  // namespace pshape
