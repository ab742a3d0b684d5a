#include "pshape/csv.hpp"

#include <charconv>
#include <cmath>

#include "pshape/error.hpp"

namespace pshape {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns)
    : out_(path, std::ios::binary), ncols_(columns.size()), path_(path.string()) {
  check(out_.good(), "cannot open CSV for writing: ", path_);
  for (size_t i = 0; i < columns.size(); ++i) {
    if (i) out_ << ',';
    out_ << columns[i];
  }
  out_ << '\n';
}

void CsvWriter::row(std::span<const double> values) {
  check(values.size() == ncols_, path_, ": row has ", values.size(), " cells, expected ", ncols_);
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) out_ << ',';
    out_ << format_double(values[i]);
  }
  out_ << '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  check(cells.size() == ncols_, path_, ": row has ", cells.size(), " cells, expected ", ncols_);
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
}

void CsvWriter::close() {
  if (out_.is_open()) {
    out_.flush();
    check(out_.good(), "short write to ", path_);
    out_.close();
  }
}

}  // namespace pshape
