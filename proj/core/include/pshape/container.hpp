#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pshape/jsonio.hpp"
#include "pshape/tensor.hpp"

namespace pshape {

// Common artifact container. Layout:
//
//   bytes 0..7    magic "PSHAPE01"
//   bytes 8..15   u64 little-endian header length
//   header        UTF-8 JSON: {"meta": {...}, "arrays": [{name, shape, offset}, ...]}
//   payload       little-endian f64 arrays, in header order, offsets relative
//                 to payload start
//
// Parameter files, trajectory sets, cluster models and policies all reuse this
// format, distinguished by meta["kind"].

struct NamedArray {
  std::string name;
  Tensor tensor;
};

struct Container {
  Json meta;
  std::vector<NamedArray> arrays;

  const Tensor& array(const std::string& name) const;
  bool has_array(const std::string& name) const;
};

void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

// Convenience: read, verify meta["kind"] matches.
Container read_container(const std::filesystem::path& path, const std::string& expected_kind);

inline constexpr char kContainerMagic[8] = {'P', 'S', 'H', 'A', 'P', 'E', '0', '1'};

}  // namespace pshape
