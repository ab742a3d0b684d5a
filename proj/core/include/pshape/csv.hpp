#pragma once

#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace pshape {

// Shortest round-trip representation (std::to_chars), so repeated runs emit
// byte-identical files.
std::string format_double(double v);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns);

  void row(std::span<const double> values);
  void row(const std::vector<std::string>& cells);
  void close();

 private:
  std::ofstream out_;
  size_t ncols_;
  std::string path_;
};

}  // namespace pshape
