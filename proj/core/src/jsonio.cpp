#include "pshape/jsonio.hpp"

#include <fstream>

namespace pshape {

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  check(in.good(), "cannot open JSON file: ", path.string());
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail("failed to parse ", path.string(), ": ", e.what());
  }
  return j;
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "cannot write JSON file: ", path.string());
  out << j.dump(2) << "\n";
  check(out.good(), "short write to ", path.string());
}

const Json& require_field(const Json& j, const std::string& key, const std::string& where) {
  check(j.contains(key), where, ": missing required key \"", key, "\"");
  return j.at(key);
}

void reject_unknown_keys(const Json& j, const std::vector<std::string>& allowed,
                         const std::string& where) {
  if (!j.is_object()) return;
  for (const auto& item : j.items()) {
    bool known = false;
    for (const auto& k : allowed)
      if (item.key() == k) {
        known = true;
        break;
      }
    check(known, where, ": unknown key \"", item.key(), "\"");
  }
}

}  // namespace pshape
